"""
桌面规模验收：合成 4 类纹理上的学习能力与消融趋势。

耗时较长，仅在传入 --run-slow 时运行（见 ci/scripts/run_acceptance.py）。
"""
import os

import allure
import pytest

from src.data.synthetic import generate_synthetic
from src.engine.ablation import run_ablation
from src.engine.checkpoint import load_checkpoint
from src.engine.config import load_train_config
from src.engine.evaluator import evaluate
from src.engine.trainer import train
from src.utils.config.manager import project_root
from src.utils.log.manager import get_logger

from .conftest import ABLATION_ACCEPTANCE, DESK_ACCEPTANCE

logger = get_logger(__name__)


@pytest.fixture(scope="module")
def desk_dataset(tmp_path_factory):
    root = str(tmp_path_factory.mktemp("desk"))
    train_index = generate_synthetic(DESK_ACCEPTANCE["classes"], DESK_ACCEPTANCE["train_per_class"],
                                     DESK_ACCEPTANCE["seed"], root, split="train")
    test_index = generate_synthetic(DESK_ACCEPTANCE["classes"], DESK_ACCEPTANCE["test_per_class"],
                                    DESK_ACCEPTANCE["seed"], root, split="test")
    return root, train_index, test_index


def _desk_config(root: str, **overrides):
    path = os.path.join(project_root(), DESK_ACCEPTANCE["config"])
    return load_train_config(path, {"data.root": root, **overrides}, use_env=False)


@pytest.mark.slow
@pytest.mark.acceptance
@allure.feature("验收")
@allure.story("桌面规模学习")
@allure.title("full 变体在合成 4 类数据上训练准确率 ≥ 0.95、留出准确率 ≥ 0.80")
def test_desk_scale_learning(desk_dataset, tmp_path):
    root, train_index, test_index = desk_dataset
    config = _desk_config(root, loss=DESK_ACCEPTANCE["loss"])
    assert config.loss == "l2"
    result = train(config, str(tmp_path), train_index, test_index)

    best_train = max(m.train_acc for m in result.history)
    logger.info(f"桌面验收: 最高训练准确率={best_train:.4f}, 最优轮次={result.best_epoch}")
    assert best_train >= DESK_ACCEPTANCE["min_train_acc"]
    assert result.best_checkpoint is not None
    report = evaluate(load_checkpoint(result.best_checkpoint), test_index)
    assert report.overall >= DESK_ACCEPTANCE["min_test_acc"]

    transitions = DESK_ACCEPTANCE["loss_transitions"]
    losses = [m.train_loss for m in result.history[:transitions + 1]]
    non_increasing = sum(later <= earlier for earlier, later in zip(losses, losses[1:]))
    assert non_increasing >= DESK_ACCEPTANCE["min_non_increasing"], losses


@pytest.mark.slow
@pytest.mark.acceptance
@allure.feature("验收")
@allure.story("消融趋势")
@allure.title("固定三个种子，平均留出准确率 full ≥ b2 ≥ b1")
def test_ablation_ordering(desk_dataset, tmp_path):
    root, train_index, test_index = desk_dataset
    config = _desk_config(root, epochs=ABLATION_ACCEPTANCE["epochs"], loss=ABLATION_ACCEPTANCE["loss"])
    table = run_ablation(config, ABLATION_ACCEPTANCE["variants"], ABLATION_ACCEPTANCE["seeds"],
                         str(tmp_path), train_index, test_index)
    logger.info("\n" + table.format())
    assert table.row("full").mean_test >= table.row("b2").mean_test
    assert table.row("b2").mean_test >= table.row("b1").mean_test
