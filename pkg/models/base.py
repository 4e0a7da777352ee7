"""
领域模型基础类
"""

import dataclasses
import enum
from typing import Any, Dict, Iterable, Optional


def _plain(value):
    if isinstance(value, enum.Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return value.to_dict() if hasattr(value, 'to_dict') else dataclasses.asdict(value)
    if isinstance(value, dict):
        return {(k.value if isinstance(k, enum.Enum) else k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class BaseModel:
    """基础模型类 (mixin for frozen dataclasses)"""

    def to_dict(self, exclude: Optional[Iterable[str]] = None) -> Dict[str, Any]:
        """转换为字典格式"""
        exclude = set(exclude or [])
        result = {}
        for field in dataclasses.fields(self):
            if field.name in exclude or not field.repr:
                continue
            result[field.name] = _plain(getattr(self, field.name))
        return result

    def __repr__(self):
        return f'<{self.__class__.__name__} {self.to_dict()}>'
