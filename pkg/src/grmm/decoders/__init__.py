from .model import GRMM, Codebooks, rest_mesh
from .networks import ConvDecoder, MeshDecoder, flatten_map

__all__ = ["GRMM", "Codebooks", "rest_mesh", "ConvDecoder", "MeshDecoder", "flatten_map"]
