"""specpaint: external spectrogram-inpainting generator.

Speaks the line-JSON protocol on stdin/stdout: one request per line, one
response per line, result PNG written where the request asks. Mock mode is
weights-free and deterministic; model mode wraps a pretrained latent
diffusion inpainting pipeline.
"""

from .config import BackendConfig
from .server import serve

__version__ = "0.1.0"
