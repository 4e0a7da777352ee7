#!/usr/bin/env python3
"""
AutoLC - 命令行入口

主要功能:
- 加载环境配置
- 注册搜索/解码/训练/评估/效率/数据/梯度检查命令
- 异常到退出码的映射 (0 ok, 1 usage, 2 data, 3 numerical)
"""

import sys

import click

from commands import cli, register_commands


def create_cli() -> click.Group:
    """命令行工厂函数"""
    return register_commands(cli)


def main(argv=None) -> int:
    return create_cli().main(args=argv, prog_name='autolc', standalone_mode=False)


if __name__ == '__main__':
    sys.exit(main())
