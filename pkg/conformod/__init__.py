from __future__ import absolute_import
from __future__ import unicode_literals

from .boxwise_conformal import CalibrationArtifact
from .boxwise_conformal import calibrate_boxwise
from .boxwise_conformal import conformal_quantile
from .config import CONFIG
from .config import build_run_config
from .engine.states import Infeasible
from .imagewise_crc import ImageRecord
from .imagewise_crc import calibrate_crc
from .imagewise_crc import calibrate_hausdorff
from .imagewise_crc import calibrate_imagewise
from .metrics import evaluate
