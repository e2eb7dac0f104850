"""Two-element interferometric search for narrowband pulse pairs."""

__version__ = "0.1.0"

from .exceptions import PulsePairError  # noqa: E402
from .firstlevel import PulseDetector  # noqa: E402
from .geometry import ObservatoryConfig, SkyDirection  # noqa: E402
from .ionosphere import IonoParams  # noqa: E402
from .secondlevel import FilterSet, PairSelector  # noqa: E402
from .simulator import ScenarioConfig, SourceSpec, simulate  # noqa: E402
from .statistics import DoiSearch, histogram  # noqa: E402

__all__ = [
    "DoiSearch", "FilterSet", "IonoParams", "ObservatoryConfig", "PairSelector",
    "PulseDetector", "PulsePairError", "ScenarioConfig", "SkyDirection", "SourceSpec",
    "histogram", "simulate",
]
