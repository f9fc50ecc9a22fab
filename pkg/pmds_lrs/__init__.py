from .codec import Codeword, UnrecoverablePattern, decode_erasures, encode, generator, syndrome  # noqa
from .gf import FieldError, FieldTower, ZeroInverse, arith, field_create  # noqa
from .linalg import FieldTag, Inconsistent, Matrix, MatrixError  # noqa
from .mrcons import MrCode, MrParams, ParameterError, build_code, example1_code  # noqa
from .pool import VerificationPool  # noqa
from .sumrank import InstanceTooLarge, LengthPartition, LrsCode, build_lrs_generator  # noqa
from .verify import ErasurePattern, Method, VerificationReport, averify_mr, verify_mr  # noqa

__version__ = "0.1.0"
