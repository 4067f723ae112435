import allure
import pytest
import torch
from torchvision.models import resnet18, resnet50

from src.core.base.errors import ConfigValueError, ShapeError, WeightsLoadError
from src.model.backbone import (
    FEATURE_CHANNELS,
    ResNetBackbone,
    build_backbone,
    extract_features,
    load_pretrained,
    save_weights,
)

from .conftest import BACKBONE_BAD_INPUT_IDS, BACKBONE_BAD_INPUTS


@pytest.mark.model
@pytest.mark.smoke
@allure.feature("模型层")
@allure.story("骨干网络")
@allure.title("ResNet-18 把 256×256 输入映射为 512×8×8 特征图")
def test_resnet18_feature_shape(backbone18, images):
    with torch.no_grad():
        z = extract_features(images, backbone18)
    assert tuple(z.shape) == (2, FEATURE_CHANNELS, 8, 8)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("骨干网络")
@allure.title("ResNet-50 经 1×1 压缩后同样输出 512×8×8")
def test_resnet50_feature_shape():
    backbone = ResNetBackbone(depth=50).eval()
    with torch.no_grad():
        z = backbone(torch.randn(1, 3, 256, 256))
    assert tuple(z.shape) == (1, FEATURE_CHANNELS, 8, 8)
    assert backbone.manifest() == {"depth": 50, "feature_channels": 2048, "out_channels": 512}


@pytest.mark.model
@allure.feature("模型层")
@allure.story("骨干网络")
@allure.title("随机初始化后不含分类头参数")
def test_backbone_has_no_classifier_head(backbone18):
    names = [name for name, _ in backbone18.named_parameters()]
    assert not any(name.startswith("fc") for name in names)
    assert backbone18.reduce is None


@pytest.mark.model
@pytest.mark.negative
@allure.feature("模型层")
@allure.story("骨干网络")
@allure.title("输入尺寸不是 (B, 3, 256, 256) 时抛出 ShapeError")
@pytest.mark.parametrize("case", BACKBONE_BAD_INPUTS, ids=BACKBONE_BAD_INPUT_IDS)
def test_backbone_rejects_bad_input(backbone18, case):
    with pytest.raises(ShapeError) as excinfo:
        backbone18(torch.zeros(*case["shape"]))
    assert excinfo.value.actual == tuple(case["shape"])
    assert "256" in str(excinfo.value)


@pytest.mark.model
@pytest.mark.negative
@allure.feature("模型层")
@allure.story("骨干网络")
@allure.title("不支持的深度抛出配置错误")
def test_unsupported_depth():
    with pytest.raises(ConfigValueError):
        ResNetBackbone(depth=34)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("骨干权重")
@allure.title("save_weights 写出的容器可以被 load_pretrained 无损读回")
def test_weights_container_roundtrip(tmp_path, backbone18, images):
    path = tmp_path / "weights" / "resnet18.pth"
    save_weights(backbone18, str(path))
    loaded = load_pretrained(str(path), depth=18).eval()
    with torch.no_grad():
        assert torch.equal(backbone18(images), loaded(images))


@pytest.mark.model
@allure.feature("模型层")
@allure.story("骨干权重")
@allure.title("裸 torchvision state_dict 可加载，fc 参数被丢弃")
def test_load_bare_torchvision_state_dict(tmp_path, images):
    reference = resnet18(weights=None).eval()
    path = tmp_path / "bare.pth"
    torch.save(reference.state_dict(), path)
    backbone = load_pretrained(str(path), depth=18).eval()
    with torch.no_grad():
        expected = torch.nn.Sequential(*list(reference.children())[:-2])(images)
        assert torch.allclose(backbone(images), expected, atol=1e-6)


@pytest.mark.model
@pytest.mark.negative
@allure.feature("模型层")
@allure.story("骨干权重")
@allure.title("深度不匹配、文件缺失或损坏时抛出 WeightsLoadError")
def test_load_errors(tmp_path, backbone18):
    path = tmp_path / "resnet18.pth"
    save_weights(backbone18, str(path))
    with pytest.raises(WeightsLoadError, match="深度不匹配"):
        load_pretrained(str(path), depth=50)
    with pytest.raises(WeightsLoadError, match="不存在"):
        load_pretrained(str(tmp_path / "missing.pth"), depth=18)
    corrupt = tmp_path / "corrupt.pth"
    corrupt.write_bytes(b"not a torch file")
    with pytest.raises(WeightsLoadError, match="无法解析"):
        load_pretrained(str(corrupt), depth=18)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("骨干网络")
@allure.title("冻结后无可训练参数且 train() 仍保持 eval 模式")
def test_freeze_keeps_eval_mode():
    backbone = build_backbone(depth=18, freeze=True)
    backbone.train()
    assert not backbone.training
    assert not any(parameter.requires_grad for parameter in backbone.parameters())


@pytest.mark.model
@allure.feature("模型层")
@allure.story("骨干网络")
@allure.title("eval 模式下同一输入两次前向结果逐位相同")
def test_eval_mode_is_deterministic(backbone18, images):
    with torch.no_grad():
        first = backbone18(images)
        second = backbone18(images)
    assert torch.equal(first, second)


@pytest.mark.model
@allure.feature("模型层")
@allure.story("骨干网络")
@allure.title("特征图求和对骨干参数有非零梯度")
def test_gradient_reaches_parameters(images):
    torch.manual_seed(1)
    backbone = ResNetBackbone(depth=18)
    backbone(images).sum().backward()
    grads = [p.grad for p in backbone.parameters() if p.grad is not None]
    assert grads
    assert any(bool(grad.abs().sum() > 0) for grad in grads)
    assert backbone.trunk[0].weight.grad.abs().sum() > 0


@pytest.mark.model
@allure.feature("模型层")
@allure.story("骨干权重")
@allure.title("完整的裸 ResNet-50 state_dict 可加载，仅 1×1 压缩卷积保留随机初始化")
def test_load_bare_resnet50_state_dict(tmp_path):
    reference = resnet50(weights=None)
    path = tmp_path / "bare50.pth"
    torch.save(reference.state_dict(), path)
    backbone = load_pretrained(str(path), depth=50)
    assert torch.equal(backbone.trunk[0].weight, reference.conv1.weight)
    assert backbone.reduce is not None


@pytest.mark.model
@pytest.mark.negative
@allure.feature("模型层")
@allure.story("骨干权重")
@allure.title("缺少骨干参数的截断权重文件抛出 WeightsLoadError")
def test_truncated_weights_are_rejected(tmp_path, backbone18):
    bare = {key: value for key, value in resnet50(weights=None).state_dict().items()
            if not key.startswith("layer4.")}
    bare_path = tmp_path / "truncated50.pth"
    torch.save(bare, bare_path)
    with pytest.raises(WeightsLoadError, match="缺失"):
        load_pretrained(str(bare_path), depth=50)

    container = {"manifest": backbone18.manifest(),
                 "state_dict": {key: value for key, value in backbone18.state_dict().items()
                                if not key.startswith("reduce.") and ".bn2." not in key}}
    container_path = tmp_path / "truncated18.pth"
    torch.save(container, container_path)
    with pytest.raises(WeightsLoadError, match="缺失"):
        load_pretrained(str(container_path), depth=18)
