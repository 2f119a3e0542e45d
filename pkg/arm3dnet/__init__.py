"""
arm3dnet - 동적 그래프 확산 합성곱 + 자기회귀 혼합밀도 시계열 예측 라이브러리
"""

__version__ = "0.1.0"
