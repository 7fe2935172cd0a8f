from .errors import FormatError, ImageError, ManifestError, PlyError, TensorError
from .images import load_image, png_bytes, resize_image, save_image
from .manifest import ViewEntry, ViewManifest, load_camera, load_manifest, load_views, parse_camera
from .ply import load_ply, ply_bytes, save_ply
from .tensor import load_tensor, save_tensor, tensor_bytes

__all__ = [
    "FormatError",
    "ImageError",
    "ManifestError",
    "PlyError",
    "TensorError",
    "ViewEntry",
    "ViewManifest",
    "load_camera",
    "load_image",
    "load_manifest",
    "load_ply",
    "load_tensor",
    "load_views",
    "parse_camera",
    "ply_bytes",
    "png_bytes",
    "resize_image",
    "save_image",
    "save_ply",
    "save_tensor",
    "tensor_bytes",
]
