"""
模块系统

Modules register Parameters, numpy buffers and child modules by attribute
assignment. Calling a module runs ``forward`` inside a name scope so the
cost tracer can attribute every recorded operation to a layer.
"""

from collections import OrderedDict
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from autodiff.tensor import Parameter, name_scope
from core.errors import DataError


class Module:
    """基础模块类"""

    def __init__(self):
        object.__setattr__(self, '_parameters', OrderedDict())
        object.__setattr__(self, '_buffers', OrderedDict())
        object.__setattr__(self, '_modules', OrderedDict())
        object.__setattr__(self, '_scope', '')
        object.__setattr__(self, 'training', True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._parameters[name] = value
        elif isinstance(value, Module):
            object.__setattr__(value, '_scope', name)
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray):
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        with name_scope(self._scope):
            return self.forward(*args, **kwargs)

    def children(self) -> Iterator['Module']:
        return iter(self._modules.values())

    def named_modules(self, prefix: str = '') -> Iterator[Tuple[str, 'Module']]:
        yield prefix, self
        for name, child in self._modules.items():
            yield from child.named_modules(f'{prefix}.{name}' if prefix else name)

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Parameter]]:
        """Yields each Parameter once and stamps its dotted name."""
        seen = set()
        for module_name, module in self.named_modules(prefix):
            for name, param in module._parameters.items():
                if id(param) in seen:
                    continue
                seen.add(id(param))
                full = f'{module_name}.{name}' if module_name else name
                param.name = full
                yield full, param

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> Iterator[Tuple[str, np.ndarray]]:
        for module_name, module in self.named_modules():
            for name, buf in module._buffers.items():
                yield (f'{module_name}.{name}' if module_name else name), buf

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def train(self, mode: bool = True) -> 'Module':
        for _, module in self.named_modules():
            object.__setattr__(module, 'training', mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = OrderedDict((name, p.data) for name, p in self.named_parameters())
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, tensors: Dict[str, np.ndarray], strict: bool = True):
        """Copies values in place; shapes must match."""
        own = self.state_dict()
        missing = [name for name in own if name not in tensors]
        unexpected = [name for name in tensors if name not in own]
        if strict and (missing or unexpected):
            raise DataError("Checkpoint does not match the network",
                            details={'missing': missing[:10], 'unexpected': unexpected[:10]})
        for name, target in own.items():
            if name not in tensors:
                continue
            value = np.asarray(tensors[name])
            if value.shape != target.shape:
                raise DataError(f"Shape mismatch for '{name}': {value.shape} vs {target.shape}")
            np.copyto(target, value.astype(target.dtype))

    def __repr__(self):
        lines = [f'{self.__class__.__name__}(']
        for name, child in self._modules.items():
            child_repr = repr(child).replace('\n', '\n  ')
            lines.append(f'  ({name}): {child_repr}')
        lines.append(')')
        return '\n'.join(lines) if self._modules else f'{self.__class__.__name__}()'


class ModuleList(Module):
    def __init__(self, modules: Optional[Iterable[Module]] = None):
        super().__init__()
        for module in modules or ():
            self.append(module)

    def append(self, module: Module):
        setattr(self, str(len(self._modules)), module)
        return self

    def __getitem__(self, index: int) -> Module:
        return list(self._modules.values())[index]

    def __len__(self):
        return len(self._modules)

    def __iter__(self):
        return iter(self._modules.values())


class ModuleDict(Module):
    def __init__(self, modules: Optional[Dict[str, Module]] = None):
        super().__init__()
        for key, module in (modules or {}).items():
            self[key] = module

    def __setitem__(self, key, module: Module):
        setattr(self, str(key), module)

    def __getitem__(self, key) -> Module:
        return self._modules[str(key)]

    def __contains__(self, key):
        return str(key) in self._modules

    def __len__(self):
        return len(self._modules)

    def keys(self):
        return self._modules.keys()

    def items(self):
        return self._modules.items()

    def values(self):
        return self._modules.values()


class Sequential(ModuleList):
    def forward(self, x):
        for module in self:
            x = module(x)
        return x
