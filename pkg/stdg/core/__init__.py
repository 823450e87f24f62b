"""
求解器核心模块
"""
