"""
训练引擎：实验配置、训练循环、评估、检查点、梯度检查和消融实验。

子模块按需导入，src.model.factory 依赖 src.engine.config。
"""
