from __future__ import absolute_import
from __future__ import unicode_literals

from .config import CONFIG
from .config import build_run_config
from .util import Method, RunConfig
