#!/usr/bin/env python
"""
桌面规模验收入口。

串行执行 acceptance 标记的 slow 用例（桌面规模学习、消融趋势），
生成 Allure 报告并打印统计摘要。退出码与 pytest 一致。
"""
import argparse
import os
import subprocess
import sys

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '../..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from ci.scripts.utils import format_summary, generate_allure_report, get_allure_summary  # noqa: E402

RESULTS_DIR = "output/reports/acceptance-results"
REPORT_DIR = "output/reports/acceptance-report"


def run_acceptance(env: str = "test") -> int:
    command = ["pytest", "-m", "acceptance", "--run-slow", "-p", "no:xdist", "-p", "no:rerunfailures",
               f"--alluredir={RESULTS_DIR}", f"--env={env}"]
    print(f"[INFO] 执行: {' '.join(command)}")
    return subprocess.run(command, cwd=project_root, check=False).returncode


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="桌面规模验收（耗时较长）")
    parser.add_argument("--env", default="test", help="运行环境 (dev, test, gpu)")
    args = parser.parse_args()

    code = run_acceptance(args.env)
    report_dir = os.path.join(project_root, REPORT_DIR)
    if generate_allure_report(os.path.join(project_root, RESULTS_DIR), report_dir):
        print(f"[INFO] {format_summary(get_allure_summary(report_dir))}")
    sys.exit(code)
