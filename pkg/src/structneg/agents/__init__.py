from .lm import ConfigurationError, LmAgent, LmBackend, LmError, RetryPolicy, build_messages, lm_generate
from .scripted import (
    FAMILIES,
    ScriptedAgent,
    ScriptedStrategy,
    choose_offer,
    scripted_generate,
    scripted_target_utility,
)

__all__ = [
    "ConfigurationError",
    "FAMILIES",
    "LmAgent",
    "LmBackend",
    "LmError",
    "RetryPolicy",
    "ScriptedAgent",
    "ScriptedStrategy",
    "build_messages",
    "choose_offer",
    "lm_generate",
    "scripted_generate",
    "scripted_target_utility",
]
