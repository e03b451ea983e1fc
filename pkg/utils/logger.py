import os
import sys
from datetime import datetime
from pathlib import Path

from loguru import logger

# 移除默认的 sink
logger.remove()

# 通用格式化字符串
log_format = "<green>{time:YYYY-MM-DD HH:mm:ss}</green> [<level>{level}</level>] <white>{message}</white> (<cyan>{file}:{line}</cyan>)"

# 控制台输出走 stderr，stdout 留给命令行结果
_console_id = logger.add(
    sink=sys.stderr,
    format=log_format,
    level=os.getenv("RETRODICT_LOG_LEVEL", "WARNING").upper(),
    colorize=True,
)

# 添加文件输出 (DEBUG 级别及以上)
if os.getenv("RETRODICT_LOG_FILE", "1") != "0":
    try:
        log_dir = Path("logs")
        log_dir.mkdir(exist_ok=True)
        log_file = (
            log_dir / f'retrodict_{datetime.now().strftime("%Y%m%d_%H%M%S")}.log'
        )
        logger.add(
            sink=log_file,
            format=log_format,
            level="DEBUG",
            rotation="10 MB",
            retention="10 days",
            encoding="utf-8",
        )
    except Exception as e:
        print(f"Error adding file logger: {e}", file=sys.stderr)


def set_console_level(level: str) -> None:
    """调整控制台日志级别"""
    global _console_id
    logger.remove(_console_id)
    _console_id = logger.add(
        sink=sys.stderr, format=log_format, level=level.upper(), colorize=True
    )


# 导出 logger 实例供其他模块使用
__all__ = ["logger", "set_console_level"]
