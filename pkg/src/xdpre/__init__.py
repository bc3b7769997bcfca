"""Cross-domain attribute-based proxy re-encryption toolkit."""

from .groups import CURVE, CurveBackend, DebugBackend, get_backend
from .policy import parse_policy, build_matrix
from .scheme import (
    decrypt,
    decrypt_reencrypted,
    encrypt,
    issue_crossdomain_key,
    keygen,
    reencrypt_corrected,
    reencrypt_paper,
    rekeygen_paper,
    setup,
)

__version__ = "0.1.0"
