"""HTTP sidecar serving hidden-layer token embeddings.

Accepts token ids (never raw text: tokenization lives with the caller,
so one tokenizer governs the whole system) and returns per-sentence,
per-layer float32 token-embedding matrices.

Layer indexing convention, enforced here and relied on by clients:
index 0 is the pre-encoder embedding output; index k >= 1 is the output
of encoder block k.
"""

__version__ = "0.1.0"

from .models import ModelHandle, ModelRegistry  # noqa: F401
from .service import create_app  # noqa: F401
