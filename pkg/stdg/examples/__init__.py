"""
基准算例脚本
"""
