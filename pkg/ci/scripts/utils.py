"""
CI流程通用工具函数：
- 生成 Allure 报告
- 获取Allure报告统计信息
"""
import json
import os
import shutil
import subprocess
from typing import Dict, Optional


def generate_allure_report(results_dir: str, report_dir: str) -> bool:
    """调用 allure 命令行生成报告；未安装 allure 时返回 False。"""
    if shutil.which("allure") is None:
        print("[WARNING] 未找到 allure 命令行，跳过报告生成")
        return False
    result = subprocess.run(["allure", "generate", results_dir, "-o", report_dir, "--clean"], check=False)
    return result.returncode == 0


def get_allure_summary(report_dir_base: str = "output/reports/allure-report") -> Optional[Dict[str, int]]:
    """获取Allure报告的统计摘要。

    Args:
        report_dir_base: Allure报告所在的根目录。

    Returns:
        dict or None: 包含统计信息的字典（duration 为毫秒），或在找不到文件时返回None。
    """
    summary_path = os.path.join(report_dir_base, "widgets", "summary.json")
    if not os.path.exists(summary_path):
        print(f"[WARNING] Summary file not found at: {summary_path}")
        return None
    try:
        with open(summary_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        print(f"[ERROR] Failed to read or parse summary file {summary_path}: {e}")
        return None

    statistic = data.get("statistic", {})
    summary = {key: statistic.get(key, 0) for key in ("total", "passed", "failed", "broken", "skipped", "unknown")}
    summary["duration"] = data.get("time", {}).get("duration", 0)
    return summary


def format_summary(summary: Optional[Dict[str, int]]) -> str:
    if not summary:
        return "没有可用的 Allure 统计信息"
    seconds = summary["duration"] / 1000
    return (f"共 {summary['total']} 个用例: 通过 {summary['passed']}, 失败 {summary['failed']}, "
            f"异常 {summary['broken']}, 跳过 {summary['skipped']}, 耗时 {seconds:.1f}s")
