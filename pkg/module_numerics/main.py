import logging

import numpy as np
from scipy import special

from common.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

# 複數矩陣一律以 numpy complex128 的二維陣列表示 (row-major)。
COMPLEX_DTYPE = np.complex128


def as_complex_matrix(a, name="matrix"):
    """
    將輸入轉為二維 complex128 陣列並檢查所有元素為有限值。
    一維向量視為 1×n 的列向量。
    """
    arr = np.asarray(a, dtype=COMPLEX_DTYPE)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b):
    """標準複數矩陣乘法。a.cols 必須等於 b.rows。"""
    a = as_complex_matrix(a, "a")
    b = as_complex_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def hermitian(a):
    """共軛轉置 (·)^H：out[i][j] = conj(a[j][i])。"""
    return as_complex_matrix(a, "a").conj().T


def frobenius_norm_sq(a):
    """Σ|a_ij|²，即 Tr(A A^H)。"""
    arr = as_complex_matrix(a, "a")
    return float(np.sum(arr.real ** 2 + arr.imag ** 2))


def bessel_j0(x):
    """
    零階第一類 Bessel 函數 J0(x)，用於 Jakes 自相關 ρ = J0(2π f_D T)。
    scipy 的實作在小引數時使用多項式/級數近似，大引數時使用漸近展開，
    整個實數軸都不會發散。
    """
    x = float(x)
    if not np.isfinite(x):
        raise InvalidArgumentError(f"bessel_j0 needs a finite argument, got {x}")
    return float(special.j0(x))
