"""差分网络估计命令行"""
