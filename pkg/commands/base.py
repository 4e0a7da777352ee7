"""
命令响应工具

包含统一的命令输出格式
"""

import json
from datetime import datetime, timezone
from typing import Any, Dict, Optional

import click

from core.checkpoint import json_default


class CommandResponse:
    """
    统一的命令响应类

    标准响应格式：
    {
        "code": 0,
        "message": "Search finished",
        "data": {...},
        "timestamp": "2026-10-19T10:00:00.000000+00:00",
        "command": "search"
    }

    ``code`` is the process exit code.
    """

    def __init__(self,
                 data: Any = None,
                 message: str = "Success",
                 code: int = 0,
                 timestamp: Optional[str] = None,
                 command: Optional[str] = None,
                 **kwargs):
        self.code = code
        self.message = message
        self.data = data
        self.timestamp = timestamp or datetime.now(timezone.utc).isoformat()
        self.command = command or _current_command()

        for key, value in kwargs.items():
            setattr(self, key, value)

    def to_dict(self) -> Dict[str, Any]:
        result = {
            'code': self.code,
            'message': self.message,
            'timestamp': self.timestamp,
            'command': self.command,
        }
        if self.data is not None:
            result['data'] = self.data
        for key, value in self.__dict__.items():
            if key not in ['code', 'message', 'data', 'timestamp', 'command']:
                result[key] = value
        return result

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=json_default)

    def echo(self, as_json: bool = False, text: Optional[str] = None):
        """Prints the JSON envelope, or ``text`` (falling back to the message) for humans."""
        if as_json:
            click.echo(self.to_json())
        else:
            click.echo(text if text is not None else self.message)

    @classmethod
    def success(cls, data: Any = None, message: str = "Success", **kwargs):
        return cls(data=data, message=message, code=0, **kwargs)

    @classmethod
    def error(cls, message: str = "An error occurred", code: int = 1, **kwargs):
        return cls(data=None, message=message, code=code, **kwargs)


def _current_command() -> Optional[str]:
    ctx = click.get_current_context(silent=True)
    return ctx.info_name if ctx is not None else None
