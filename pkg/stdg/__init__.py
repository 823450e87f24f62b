"""
交错时空 DG 不可压流求解包
"""

__version__ = "0.1"
