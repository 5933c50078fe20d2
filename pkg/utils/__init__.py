"""工具模块：矩阵运算、数据读写、配置与日志初始化、异常类型"""
