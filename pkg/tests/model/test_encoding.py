import math

import allure
import pytest
import torch

from src.core.base.errors import ConfigValueError, ShapeError
from src.model.encoding import ShapeEncoding, TextureEncoding, encode_shape, encode_texture

from .conftest import ORACLE_INSTANCES


def _oracle_texture(patch: torch.Tensor, codewords: torch.Tensor, smoothing: torch.Tensor,
                    weight: torch.Tensor, bias: torch.Tensor) -> list:
    """单个 (C, H, W) 块的纹理编码，标量循环实现。"""
    channels, height, width = patch.shape
    num_codes = codewords.shape[0]
    descriptors = [[float(patch[c, y, x]) for c in range(channels)] for y in range(height) for x in range(width)]
    encoded = [[0.0] * channels for _ in range(num_codes)]
    for delta in descriptors:
        residuals = [[delta[c] - float(codewords[j, c]) for c in range(channels)] for j in range(num_codes)]
        logits = [-float(smoothing[j]) * sum(r * r for r in residuals[j]) for j in range(num_codes)]
        peak = max(logits)
        exps = [math.exp(value - peak) for value in logits]
        total = sum(exps)
        for j in range(num_codes):
            for c in range(channels):
                encoded[j][c] += exps[j] / total * residuals[j][c]
    flat = [value for row in encoded for value in row]
    return [sum(float(weight[f, i]) * flat[i] for i in range(len(flat))) + float(bias[f])
            for f in range(weight.shape[0])]


@pytest.mark.model
@allure.feature("模型层")
@allure.story("纹理编码")
@allure.title("encode_texture 与标量循环 oracle 一致（100 个随机实例）")
def test_encode_texture_matches_oracle():
    for seed in range(ORACLE_INSTANCES):
        torch.manual_seed(seed)
        channels, num_codes, features = 1 + seed % 3, 1 + seed % 4, 2 + seed % 3
        encoder = TextureEncoding(channels, num_codes, features).double()
        patches = torch.randn(1, 2, channels, 3, 3, dtype=torch.float64)
        out = encode_texture(patches, encoder)
        assert tuple(out.shape) == (1, 2, features)
        for i in range(2):
            expected = _oracle_texture(patches[0, i], encoder.codewords, encoder.smoothing,
                                       encoder.projection.weight, encoder.projection.bias)
            assert out[0, i].tolist() == pytest.approx(expected, rel=1e-5, abs=1e-9)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("纹理编码")
@allure.title("缩小维度（6 通道、3×3 网格共 9 块、4 个码字）下与标量循环 oracle 一致")
def test_encode_texture_reduced_dims_matches_oracle():
    torch.manual_seed(6)
    encoder = TextureEncoding(6, 4, 5).double()
    with torch.no_grad():
        encoder.smoothing.uniform_(0.5, 2.0)
    patches = torch.randn(2, 9, 6, 4, 4, dtype=torch.float64)
    out = encode_texture(patches, encoder)
    assert tuple(out.shape) == (2, 9, 5)
    for b in range(2):
        for i in range(9):
            expected = _oracle_texture(patches[b, i], encoder.codewords, encoder.smoothing,
                                       encoder.projection.weight, encoder.projection.bias)
            assert out[b, i].tolist() == pytest.approx(expected, rel=1e-5, abs=1e-9)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("纹理编码")
@allure.title("软分配权重对码字求和为 1")
def test_assignment_rows_sum_to_one():
    encoder = TextureEncoding(8, 5, 4)
    weights = encoder.assignment_weights(torch.randn(3, 36, 8, 3, 3))
    assert tuple(weights.shape) == (3, 36, 9, 5)
    assert torch.allclose(weights.sum(dim=-1), torch.ones(3, 36, 9), atol=1e-6)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("纹理编码")
@allure.title("描述子与码字同时平移时残差和编码不变")
def test_residual_translation_covariance():
    encoder = TextureEncoding(6, 3, 4).double()
    x = torch.randn(2, 6, 3, 3, dtype=torch.float64)
    shift = torch.randn(6, dtype=torch.float64)
    before = encoder(x)
    with torch.no_grad():
        encoder.codewords.add_(shift)
    after = encoder(x + shift.view(6, 1, 1))
    assert torch.allclose(before, after, atol=1e-10)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("纹理编码")
@allure.title("不投影时输出码字优先排列的 N·C 维编码")
def test_unprojected_encoding_layout():
    encoder = TextureEncoding(4, 3, out_features=None)
    x = torch.randn(2, 4, 8, 8)
    encoded = encoder(x)
    assert encoder.encoded_features == 12
    assert tuple(encoded.shape) == (2, 12)
    assert torch.allclose(encoded.view(2, 3, 4), encoder.aggregate(x))


@pytest.mark.model
@allure.feature("模型层")
@allure.story("形状编码")
@allure.title("encode_shape 等于逐块空间平均后的线性映射")
def test_encode_shape_matches_oracle():
    for seed in range(ORACLE_INSTANCES):
        torch.manual_seed(seed)
        encoder = ShapeEncoding(3, 2).double()
        patches = torch.randn(1, 4, 3, 3, 3, dtype=torch.float64)
        out = encode_shape(patches, encoder)
        for i in range(4):
            pooled = [sum(float(patches[0, i, c, y, x]) for y in range(3) for x in range(3)) / 9 for c in range(3)]
            expected = [sum(float(encoder.projection.weight[f, c]) * pooled[c] for c in range(3))
                        + float(encoder.projection.bias[f]) for f in range(2)]
            assert out[0, i].tolist() == pytest.approx(expected, rel=1e-5, abs=1e-9)


@pytest.mark.model
@pytest.mark.negative
@allure.feature("模型层")
@allure.story("纹理编码")
@allure.title("码字数 < 1 或通道数不匹配时报错")
def test_encoding_errors():
    with pytest.raises(ConfigValueError) as excinfo:
        TextureEncoding(4, 0, 2)
    assert excinfo.value.key == "dims.codes"
    with pytest.raises(ShapeError):
        TextureEncoding(4, 2, 2)(torch.randn(1, 5, 3, 3))
    with pytest.raises(ShapeError):
        ShapeEncoding(4, 2)(torch.randn(1, 5, 3, 3))
