"""Feature-volume exporter: pretrained CNN backbones to the FVL1 layout."""

from .backbones import ExportConfigError, backbone_names, build_extractor, extract
from .export import ExportConfig, ExportDataError, export
from .writers import write_fvol, write_manifest, write_mask

__version__ = "0.1.0"
