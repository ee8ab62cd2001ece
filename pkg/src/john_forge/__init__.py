__all__ = [
    "config",
    "errors",
    "symspace",
    "body",
    "shapes",
    "loewner",
    "objective",
    "minimize",
    "isotropic",
    "quadrature",
    "flow",
]
