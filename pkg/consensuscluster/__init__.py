from .clustering import *
from .consensus import *
from .enums import *
from .errors import *
from .harness import *
from .loader import *
from .metrics import *
from .privacy import *
from .report import *
from .topology import *
from .utils import *

__title__ = 'ConsensusCluster.py'
__author__ = 'ConsensusCluster.py contributors'
__license__ = 'MIT'
__version__ = '1.0.0'
