def singleton(cls):
    _instance = {}

    def inner(**kwargs):
        if cls not in _instance:
            _instance[cls] = cls(**kwargs)
        return _instance[cls]

    return inner
