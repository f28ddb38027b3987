from .network import Refiner, normalize_depth

__all__ = ["Refiner", "normalize_depth"]
