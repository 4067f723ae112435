"""
命令行入口，见 src.cli.main。
"""
