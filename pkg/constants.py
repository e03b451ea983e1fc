"""常量定义"""

# 数值容差默认值
TOL_HERM = 1e-10  # Hermitian 缺陷（最大元素绝对误差）
TOL_PSD = 1e-9  # 半正定判定，相对谱范数
TOL_UNITARY = 1e-10  # U†U - 1 最大元素
TOL_PROP = 1e-9  # 与单位算符成比例的判定
TOL_DENOM = 1e-12  # 分母退化阈值，相对 Tr(Λ)·Tr(Γ)
TOL_CLAMP = 1e-12  # 负值截断阈值，相对同一尺度
TOL_POM = 1e-9  # POM 完备性
TOL_DENSITY = 1e-10  # 密度算符单位迹
TOL_ORTHONORMAL = 1e-8  # 基矢正交归一缺陷
TOL_CROSS_CHECK = 1e-10  # 内部交叉校验

MAX_DIMENSION = 64  # 状态空间维数上限

NULL_LABEL = "0"  # 扩展测量的空结果标签

# 模拟
SIM_BLOCK_TRIALS = 4096  # 每个子随机流负责的试验数
SUBSTREAM_MULTIPLIER = 0x9E3779B97F4A7C15
SEED_MASK = 0xFFFFFFFFFFFFFFFF
Z_VARIANCE_FLOOR = 1e-12
DEFAULT_THREADS = 4

DEVICE_FILE_VERSION = 1

# 退出码
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_SYNTAX = 3
EXIT_SCHEMA = 4
EXIT_VALIDATION = 5
EXIT_DEGENERATE = 6
EXIT_CROSS_CHECK = 7
EXIT_SIMULATION = 8
