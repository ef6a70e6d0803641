from __future__ import absolute_import, unicode_literals

import warnings

warnings.filterwarnings("error", module="conformod")
