import functools

import allure
import pandas as pd


def log_step(step_name):
    """把函数调用包进 allure 步骤；pytest 之外只是普通调用"""

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            with allure.step(step_name):
                return func(*args, **kwargs)

        return wrapper

    return decorator


def attach_frame(name: str, frame: pd.DataFrame) -> None:
    """添加概率表到报告"""
    allure.attach(
        frame.to_csv(lineterminator="\n"),
        name=name,
        attachment_type=allure.attachment_type.CSV,
    )
