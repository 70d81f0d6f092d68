"""Declarative graph-vector query language: lexer, parser, planner, executor."""

from . import ast
from .executor import execute, execute_procedure, execute_statement, run_plan
from .parser import parse, parse_one
from .planner import QueryPlan, plan
from .ast import pretty

__all__ = [
    "ast", "parse", "parse_one", "plan", "pretty", "QueryPlan",
    "execute", "execute_statement", "execute_procedure", "run_plan",
]
