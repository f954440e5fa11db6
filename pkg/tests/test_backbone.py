import pytest
import torch
import torch.nn as nn
from hypothesis import given, settings, strategies as st

from lsafnet.backbone import (
    NetworkConfig,
    ResNetEncoder,
    extract_features,
    init_weights,
    load_torchvision_state,
    normalize_image,
)
from lsafnet.errors import ConfigError, ShapeError, ValidationError


def shapes(pyramid):
    return [tuple(f.shape[1:]) for f in pyramid]


def test_full_width_pyramid_shapes():
    enc = init_weights(ResNetEncoder(NetworkConfig(6)), 0).eval()
    with torch.no_grad():
        pyr = extract_features(enc, torch.randn(3, 64, 64))
    assert shapes(pyr) == [(64, 32, 32), (64, 16, 16), (128, 8, 8), (256, 4, 4), (512, 2, 2)]


def test_tiny_width_channels():
    enc = init_weights(ResNetEncoder(NetworkConfig.tiny(6)), 0).eval()
    with torch.no_grad():
        pyr = enc(torch.randn(1, 3, 32, 32))
    assert [f.shape[1] for f in pyr] == [16, 16, 32, 64, 128]


@settings(max_examples=8, deadline=None)
@given(h=st.integers(1, 4), w=st.integers(1, 4))
def test_stride_contract_any_size(h, w):
    enc = ResNetEncoder(NetworkConfig.tiny(3)).eval()
    H, W = 32 * h, 32 * w
    with torch.no_grad():
        pyr = enc(torch.randn(1, 3, H, W))
    for f, stride in zip(pyr, (2, 4, 8, 16, 32)):
        assert f.shape[2:] == (H // stride, W // stride)


@pytest.mark.parametrize("train", [False, True])
def test_zero_input_gives_zero_pyramid(train):
    enc = init_weights(ResNetEncoder(NetworkConfig.tiny(6)), 3)
    enc.train(train)
    with torch.no_grad():
        pyr = enc(torch.zeros(2, 3, 64, 64))
    for f in pyr:
        assert torch.count_nonzero(f) == 0


def test_forward_is_deterministic():
    enc = init_weights(ResNetEncoder(NetworkConfig.tiny(6)), 1).eval()
    x = torch.randn(2, 3, 64, 64)
    with torch.no_grad():
        a, b = enc(x), enc(x)
    for fa, fb in zip(a, b):
        assert torch.equal(fa, fb)


@pytest.mark.parametrize("size,dim", [((33, 64), "height"), ((64, 48), "width")])
def test_non_divisible_size_names_dimension(size, dim):
    enc = ResNetEncoder(NetworkConfig.tiny(6))
    with pytest.raises(ShapeError, match=dim):
        enc(torch.zeros(1, 3, *size))


def test_non_finite_input_rejected():
    enc = ResNetEncoder(NetworkConfig.tiny(6))
    x = torch.zeros(1, 3, 32, 32)
    x[0, 1, 3, 4] = float("nan")
    with pytest.raises(ValidationError):
        enc(x)


def test_init_same_seed_identical_weights():
    a = init_weights(ResNetEncoder(NetworkConfig.tiny(6)), 7)
    b = init_weights(ResNetEncoder(NetworkConfig.tiny(6)), 7)
    for (na, pa), (nb, pb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert na == nb and torch.equal(pa, pb)


def test_init_different_seed_differs():
    a = init_weights(ResNetEncoder(NetworkConfig.tiny(6)), 7)
    b = init_weights(ResNetEncoder(NetworkConfig.tiny(6)), 8)
    assert any(
        not torch.equal(pa, pb)
        for (na, pa), (_, pb) in zip(a.state_dict().items(), b.state_dict().items())
        if na.endswith("weight") and pa.dim() == 4
    )


def test_init_norm_layers_unit_scale_zero_shift():
    enc = init_weights(ResNetEncoder(NetworkConfig.tiny(6)), 0)
    for m in enc.modules():
        if isinstance(m, nn.BatchNorm2d):
            assert torch.all(m.weight == 1) and torch.all(m.bias == 0)


def test_he_variance_monte_carlo():
    # 64 input channels x 3x3 -> fan_in 576; 174 * 576 = 100224 samples
    conv = nn.Conv2d(64, 174, 3, bias=False)
    init_weights(nn.Sequential(conv), 11)
    var = conv.weight.detach().double().var().item()
    assert abs(var - 2 / 576) / (2 / 576) < 0.2


def test_normalize_image_range():
    img = torch.tensor([0, 255], dtype=torch.uint8).view(1, 1, 2).expand(3, 1, 2)
    out = normalize_image(img)
    assert torch.allclose(out[:, 0, 0], torch.tensor(-1.0))
    assert torch.allclose(out[:, 0, 1], torch.tensor(1.0))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"num_classes": 1},
        {"width_multiplier": 0.01},
        {"encoder_depth": (1, 1, 1)},
        {"reduction_ratio": 3},
        {"width_multiplier": 0.25, "pretrained": True},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        NetworkConfig(**kwargs)


def test_config_round_trip():
    cfg = NetworkConfig.tiny(4, use_lgce=False)
    assert NetworkConfig.from_dict(cfg.to_dict()) == cfg


def test_torchvision_state_dict_loads():
    torchvision = pytest.importorskip("torchvision")
    ref = torchvision.models.resnet34(weights=None)
    enc = ResNetEncoder(NetworkConfig(6))
    load_torchvision_state(enc, ref.state_dict())
    assert torch.equal(enc.layer3[5].conv2.weight, ref.layer3[5].conv2.weight)
