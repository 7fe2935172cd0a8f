class FormatError(ValueError):
    """Malformed input file. ``code`` is a stable identifier for the failure."""

    code = "format"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return f"[{self.code}] {super().__str__()}"


class PlyError(FormatError):
    code = "ply"


class TensorError(FormatError):
    code = "tensor"


class ManifestError(FormatError):
    code = "manifest"


class ImageError(FormatError):
    code = "image"
