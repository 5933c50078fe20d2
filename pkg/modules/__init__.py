"""算法模块：损失函数、求解器、正则化路径、仿真与基准测试"""
