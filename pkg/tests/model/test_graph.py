import math

import allure
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.base.errors import ConfigValueError, ShapeError
from src.model.eot import EoTWeights
from src.model.graph import (
    GraphAttention,
    InterDomainExchange,
    MessagePassingRound,
    MessagePassingStack,
    domain_summary,
    inter_domain_pass,
    intra_domain_pass,
    message_passing_stack,
)

from .conftest import ORACLE_INSTANCES, random_generator


def _leaky(value: float, slope: float = 0.2) -> float:
    return value if value > 0 else slope * value


def _oracle_intra(x: torch.Tensor, layer: GraphAttention) -> list:
    """单个图 (k, F) 的多头注意力（average 合并），标量循环实现。"""
    k, features = x.shape
    merged = [[0.0] * features for _ in range(k)]
    for h in range(layer.heads):
        w = layer.transform[h]
        a = layer.attention_vector[h]
        wx = [[sum(float(w[g, f]) * float(x[i, f]) for f in range(features)) for g in range(features)]
              for i in range(k)]
        for i in range(k):
            scores = []
            for j in range(k):
                e = sum(float(a[g]) * wx[i][g] for g in range(features))
                e += sum(float(a[features + g]) * wx[j][g] for g in range(features))
                scores.append(_leaky(e))
            peak = max(scores)
            exps = [math.exp(s - peak) for s in scores]
            total = sum(exps)
            for g in range(features):
                merged[i][g] += sum(exps[j] / total * wx[j][g] for j in range(k)) / layer.heads
    return [[max(0.0, value) for value in row] for row in merged]


def _oracle_inter(texture: torch.Tensor, shape: torch.Tensor, t: torch.Tensor, s: torch.Tensor,
                  exchange: InterDomainExchange) -> tuple:
    k, features = texture.shape
    r_s = [sum(float(s[j]) * float(shape[j, f]) for j in range(k)) for f in range(features)]
    r_t = [sum(float(t[j]) * float(texture[j, f]) for j in range(k)) for f in range(features)]

    def mix(linear, own, summary):
        joined = [float(v) for v in own] + summary
        return [sum(float(linear.weight[o, i]) * joined[i] for i in range(2 * features)) + float(linear.bias[o])
                for o in range(features)]

    return ([mix(exchange.texture_mix, texture[i], r_s) for i in range(k)],
            [mix(exchange.shape_mix, shape[i], r_t) for i in range(k)])


def _eot(batch: int, k: int, generator: torch.Generator) -> EoTWeights:
    texture = torch.rand(batch, k, generator=generator, dtype=torch.float64)
    return EoTWeights(texture=texture, shape=1.0 - texture)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("域内消息传递")
@allure.title("intra_domain_pass 与标量循环 oracle 一致（100 个随机实例）")
def test_intra_domain_pass_matches_oracle():
    for seed in range(ORACLE_INSTANCES):
        torch.manual_seed(seed)
        k, features, heads = 2 + seed % 4, 2 + seed % 3, 1 + seed % 3
        layer = GraphAttention(features, heads).double()
        x = torch.randn(1, k, features, dtype=torch.float64)
        out = intra_domain_pass(x, layer)
        expected = _oracle_intra(x[0], layer)
        for i in range(k):
            assert out[0, i].tolist() == pytest.approx(expected[i], rel=1e-5, abs=1e-9)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("域内消息传递")
@allure.title("注意力矩阵每行求和为 1")
def test_attention_rows_sum_to_one():
    layer = GraphAttention(8, heads=3)
    alpha = layer.attention(torch.randn(2, 36, 8))
    assert tuple(alpha.shape) == (2, 3, 36, 36)
    assert torch.allclose(alpha.sum(dim=-1), torch.ones(2, 3, 36), atol=1e-6)
    assert bool((alpha >= 0).all())


@pytest.mark.model
@allure.feature("模型层")
@allure.story("域内消息传递")
@allure.title("对块的任意置换等变")
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 16), merge=st.sampled_from(["average", "concat_project"]))
def test_intra_domain_permutation_equivariance(seed, merge):
    generator = random_generator(seed)
    torch.manual_seed(seed)
    layer = GraphAttention(4, heads=2, merge=merge).double()
    x = torch.randn(1, 6, 4, generator=generator, dtype=torch.float64)
    permutation = torch.randperm(6, generator=generator)
    assert torch.allclose(layer(x)[:, permutation], layer(x[:, permutation]), atol=1e-10)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("域间消息传递")
@allure.title("domain_summary 与逐元素加权求和一致，支持 (k,) 与 (B, k) 权重")
def test_domain_summary_matches_oracle():
    for seed in range(ORACLE_INSTANCES):
        generator = random_generator(seed)
        features = torch.randn(2, 5, 3, generator=generator, dtype=torch.float64)
        weights = torch.rand(2, 5, generator=generator, dtype=torch.float64)
        out = domain_summary(features, weights)
        for b in range(2):
            expected = [sum(float(weights[b, j]) * float(features[b, j, f]) for j in range(5)) for f in range(3)]
            assert out[b].tolist() == pytest.approx(expected, rel=1e-5, abs=1e-12)
        shared = domain_summary(features, weights[0])
        assert torch.allclose(shared[1], torch.einsum("k,kf->f", weights[0], features[1]))


@pytest.mark.model
@allure.feature("模型层")
@allure.story("域间消息传递")
@allure.title("inter_domain_pass 与标量循环 oracle 一致（100 个随机实例）")
def test_inter_domain_pass_matches_oracle():
    for seed in range(ORACLE_INSTANCES):
        torch.manual_seed(seed)
        generator = random_generator(seed)
        k, features = 2 + seed % 4, 1 + seed % 4
        exchange = InterDomainExchange(features).double()
        texture = torch.randn(1, k, features, generator=generator, dtype=torch.float64)
        shape = torch.randn(1, k, features, generator=generator, dtype=torch.float64)
        eot = _eot(1, k, generator)
        texture_out, shape_out = inter_domain_pass(texture, shape, eot, exchange)
        expected_t, expected_s = _oracle_inter(texture[0], shape[0], eot.texture[0], eot.shape[0], exchange)
        for i in range(k):
            assert texture_out[0, i].tolist() == pytest.approx(expected_t[i], rel=1e-5, abs=1e-9)
            assert shape_out[0, i].tolist() == pytest.approx(expected_s[i], rel=1e-5, abs=1e-9)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("消息传递堆叠")
@allure.title("两轮堆叠等于依次调用每一轮，EoT 权重在各轮间不变")
def test_stack_equals_sequential_rounds():
    generator = random_generator(7)
    rounds = [MessagePassingRound(4, heads=2), MessagePassingRound(4, heads=2)]
    texture, shape = torch.randn(2, 36, 4, generator=generator), torch.randn(2, 36, 4, generator=generator)
    eot = EoTWeights(texture=torch.full((2, 36), 0.3), shape=torch.full((2, 36), 0.7))
    stacked = message_passing_stack(texture, shape, eot, rounds)
    t, s = texture, shape
    for round_ in rounds:
        t, s = round_(t, s, eot)
    assert torch.allclose(stacked[0], t) and torch.allclose(stacked[1], s)


@pytest.mark.model
@pytest.mark.negative
@allure.feature("模型层")
@allure.story("消息传递堆叠")
@allure.title("空轮列表、缺少 EoT、非法头数或宽度不匹配时报错")
def test_message_passing_errors():
    with pytest.raises(ConfigValueError) as excinfo:
        MessagePassingStack([])
    assert excinfo.value.key == "dims.rounds"
    with pytest.raises(ConfigValueError):
        MessagePassingRound(4, inter=True)(torch.randn(1, 36, 4), torch.randn(1, 36, 4), None)
    with pytest.raises(ConfigValueError):
        GraphAttention(4, heads=0)
    with pytest.raises(ConfigValueError):
        GraphAttention(4, merge="sum")
    with pytest.raises(ShapeError):
        GraphAttention(4)(torch.randn(1, 36, 5))
    with pytest.raises(ShapeError):
        domain_summary(torch.randn(1, 36, 4), torch.rand(35))
    with pytest.raises(ShapeError):
        domain_summary(torch.randn(2, 36, 4), torch.rand(3, 36))
    with pytest.raises(ShapeError):
        domain_summary(torch.randn(36, 4), torch.rand(36))


@pytest.mark.model
@allure.feature("模型层")
@allure.story("域内消息传递")
@allure.title("concat_project 合并方式输出维度仍为 F")
def test_concat_project_shape():
    layer = GraphAttention(6, heads=3, merge="concat_project")
    out = layer(torch.randn(2, 36, 6))
    assert tuple(out.shape) == (2, 36, 6)
    assert bool((out >= 0).all())
