"""Late-stage bitemporal feature fusion for semantic change detection."""

from .backbone import FeaturePyramid, NetworkConfig, ResNetEncoder, init_weights, normalize_image
from .fusion_blocks import LGAA, LGCE, SFM, ConvBlock
from .losses import LossBundle, bce_change, ce_semantic, consistency, lsafnet_loss, total
from .metrics import ConfusionMatrix, MetricReport, compute_report
from .network import ForwardOutput, LSAFNet, predict

__version__ = "0.1.0"
