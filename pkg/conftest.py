import os
import sys

# 各模組以 `from module_x.main import ...` 互相匯入，倉庫根目錄即匯入根目錄
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
