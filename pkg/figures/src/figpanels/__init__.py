"""figpanels: turn error-curve CSV tables into the standard figure layouts.

Input files are the comma-separated outputs of the dynrecon CLI
(columns ``horizon,error_direct,error_iter,autocorr,bound``).  Three
layouts are supported: ``forecast-compare`` (direct vs iterative with
the 1.0 and sqrt(2) reference levels), ``torus-vs-mixed`` (plain
log-scale error panels), and ``error-analysis`` (iterative error under
a dashed theoretical slope line, direct error under the dashed
autocorrelation bound).
"""

__version__ = "0.1.0"

from .render import FigureSpec, RenderError, load_curves, render  # noqa: F401
