from __future__ import annotations

import inspect
import random
from functools import partial
from typing import Any, Callable, Mapping

from counter_attest.cfg.enums import EdgeKind
from counter_attest.demos.builder import CfgBuilder, Demo
from counter_attest.demos.exceptions import DemoParameterError, UnknownDemoError

BRANCH = EdgeKind.BRANCH
INDIRECT = EdgeKind.INDIRECT


def fig2() -> Demo:
    """
    Seven blocks with measurement points A and C. The loop D-F-G only
    touches the path A-B-C through the loop B-D-E.
    """
    b = CfgBuilder()
    b.block("A", "main", ["ecall"], measurement_point=True)
    b.block("B", "main", ["addi", "lw", "beq"])
    b.block("C", "main", ["ecall"], measurement_point=True)
    b.block("D", "main", ["mul", "bne"])
    b.block("E", "main", ["sw", "sw", "jal"])
    b.block("F", "main", ["fadd", "flw", "beq"])
    b.block("G", "main", ["xor", "jal"])
    b.edge("A", "B").edge("B", "C", BRANCH).edge("B", "D", BRANCH)
    b.edge("D", "E", BRANCH).edge("E", "B", BRANCH)
    b.edge("D", "F", BRANCH).edge("F", "G").edge("G", "D", BRANCH)
    trace = ("A", "B", "D", "F", "G", "D", "E", "B", "D", "E", "B", "C")
    return Demo("fig2", b.build("A"), trace)


def hello() -> Demo:
    """Prints a short string: one call, one small loop, short segments."""
    b = CfgBuilder()
    b.block("main_entry", "main", ["ecall"], measurement_point=True)
    b.block("main_setup", "main", ["addi", "addi", "jal"])
    b.block("main_write", "main", ["addi", "ecall"], measurement_point=True)
    b.block("main_exit", "main", ["addi", "ecall"], measurement_point=True)
    b.block("puts_entry", "puts", ["addi", "lw", "beq"])
    b.block("puts_char", "puts", ["lw", "sw", "addi", "bne"])
    b.block("puts_ret", "puts", ["add", "jalr"])
    b.chain("main_entry", "main_setup").chain("main_write", "main_exit")
    b.edge("puts_entry", "puts_char", BRANCH).edge("puts_entry", "puts_ret", BRANCH)
    b.edge("puts_char", "puts_char", BRANCH).edge("puts_char", "puts_ret", BRANCH)
    b.returns_from("puts", "puts_ret").call("main_setup", "puts", "main_write")
    trace = (
        "main_entry",
        "main_setup",
        "puts_entry",
        *(["puts_char"] * 5),
        "puts_ret",
        "main_write",
        "main_exit",
    )
    return Demo("hello", b.build("main_entry"), trace)


def crypto(
    in_loop_measurement_points: bool = False,
    outer_iterations: int = 24,
    inner_iterations: int = 16,
) -> Demo:
    """
    Key generation, a loop-heavy signing routine and verification, with
    measurement points between the three calls. The signing loops can
    optionally carry measurement points themselves: one in the inner loop
    latch and one in the carry loop.
    """
    mp = in_loop_measurement_points
    b = CfgBuilder()
    b.block("m_entry", "main", ["ecall"], measurement_point=True)
    b.block("m_call_keygen", "main", ["addi", "jal"])
    b.block("m_after_keygen", "main", ["ecall"], measurement_point=True)
    b.block("m_call_sign", "main", ["addi", "jal"])
    b.block("m_after_sign", "main", ["ecall"], measurement_point=True)
    b.block("m_call_verify", "main", ["addi", "jal"])
    b.block("m_exit", "main", ["ecall"], measurement_point=True)
    b.chain("m_entry", "m_call_keygen")
    b.chain("m_after_keygen", "m_call_sign")
    b.chain("m_after_sign", "m_call_verify")
    b.call("m_call_keygen", "keygen", "m_after_keygen")
    b.call("m_call_sign", "sign", "m_after_sign")
    b.call("m_call_verify", "verify", "m_exit")

    b.block("kg_entry", "keygen", ["addi", "lw", "bne"])
    b.block("kg_a", "keygen", ["xor", "sw"])
    b.block("kg_b", "keygen", ["mul", "sw", "add"])
    b.block("kg_ret", "keygen", ["lw", "lw", "jalr"])
    b.edge("kg_entry", "kg_a", BRANCH).edge("kg_entry", "kg_b", BRANCH)
    b.chain("kg_a", "kg_ret").chain("kg_b", "kg_ret")
    b.returns_from("keygen", "kg_ret")

    b.block("s_entry", "sign", ["addi", "addi", "sw", "lw"])
    b.block("s_outer_head", "sign", ["addi", "lw", "add", "beq"])
    b.block("s_inner_head", "sign", ["lw", "bne"])
    b.block("s_arm_a", "sign", ["mul", "add", "xor", "sw", "jal"])
    b.block("s_arm_b", "sign", ["div", "lw", "amoadd", "fadd", "jal"])
    b.block("s_arm_b_cont", "sign", ["add", "jal"])
    b.block("s_join", "sign", ["addi", "csrr", "add"])
    b.block(
        "s_latch",
        "sign",
        ["ecall", "addi", "bne"] if mp else ["addi", "bne"],
        measurement_point=mp,
    )
    b.block("s_carry_head", "sign", ["lw", "fence", "beq"])
    b.block(
        "s_carry_body",
        "sign",
        ["ecall", "add", "flw", "fsw", "jal"] if mp else ["add", "flw", "fsw", "jal"],
        measurement_point=mp,
    )
    b.block("s_outer_latch", "sign", ["addi", "sw", "jal"])
    b.block("s_final", "sign", ["lw", "jalr"])
    b.block("mix_entry", "mix", ["xor", "mul", "lw", "jalr"])
    b.chain("s_entry", "s_outer_head")
    b.edge("s_outer_head", "s_inner_head", BRANCH).edge("s_outer_head", "s_final", BRANCH)
    b.edge("s_inner_head", "s_arm_a", BRANCH).edge("s_inner_head", "s_arm_b", BRANCH)
    b.edge("s_arm_a", "s_join", BRANCH)
    b.call("s_arm_b", "mix", "s_arm_b_cont").returns_from("mix", "mix_entry")
    b.edge("s_arm_b_cont", "s_join", BRANCH)
    b.chain("s_join", "s_latch")
    b.edge("s_latch", "s_inner_head", BRANCH).edge("s_latch", "s_carry_head", BRANCH)
    b.edge("s_carry_head", "s_carry_body", BRANCH)
    b.edge("s_carry_head", "s_outer_latch", BRANCH)
    b.edge("s_carry_body", "s_carry_head", BRANCH)
    b.edge("s_outer_latch", "s_outer_head", BRANCH)
    b.returns_from("sign", "s_final")

    b.block("vf_entry", "verify", ["lw", "lw", "bne"])
    b.block("vf_ok", "verify", ["add", "xor", "jal"])
    b.block("vf_fail", "verify", ["addi", "sw"])
    b.block("vf_ret", "verify", ["jalr"])
    b.edge("vf_entry", "vf_ok", BRANCH).edge("vf_entry", "vf_fail", BRANCH)
    b.chain("vf_ok", "vf_ret").chain("vf_fail", "vf_ret")
    b.returns_from("verify", "vf_ret")

    steps = ["m_entry", "m_call_keygen", "kg_entry", "kg_a", "kg_ret", "m_after_keygen"]
    steps += ["m_call_sign", "s_entry"]
    for outer in range(outer_iterations):
        steps.append("s_outer_head")
        for inner in range(inner_iterations):
            steps.append("s_inner_head")
            if (outer + 2 * inner) % 3:
                steps.append("s_arm_a")
            else:
                steps += ["s_arm_b", "mix_entry", "s_arm_b_cont"]
            steps += ["s_join", "s_latch"]
        steps.append("s_carry_head")
        for _ in range(2 + outer % 4):
            steps += ["s_carry_body", "s_carry_head"]
        steps.append("s_outer_latch")
    steps += ["s_outer_head", "s_final", "m_after_sign"]
    steps += ["m_call_verify", "vf_entry", "vf_ok", "vf_ret", "m_exit"]
    name = "crypto-in-loop" if mp else "crypto"
    return Demo(name, b.build("m_entry"), tuple(steps))


def dyndispatch() -> Demo:
    """An indirect call through a handler table and an intra-function jump table."""
    b = CfgBuilder()
    b.block("main_entry", "main", ["ecall"], measurement_point=True)
    b.block("dispatch", "main", ["lw", "add", "jalr"])
    b.block("after_dispatch", "main", ["addi", "ecall"], measurement_point=True)
    b.block("table_jump", "main", ["lw", "jalr"])
    b.block("case_small", "main", ["addi", "sw", "jal"])
    b.block("case_large", "main", ["mul", "sw", "sw", "jal"])
    b.block("main_exit", "main", ["ecall"], measurement_point=True)
    b.chain("main_entry", "dispatch").chain("after_dispatch", "table_jump")
    b.edge("table_jump", "case_small", INDIRECT).edge("table_jump", "case_large", INDIRECT)
    b.edge("case_small", "main_exit", BRANCH).edge("case_large", "main_exit", BRANCH)
    handlers = {
        "on_read": ["lw", "lw", "jalr"],
        "on_write": ["sw", "fence", "jalr"],
        "on_stat": ["csrr", "add", "xor", "jalr"],
    }
    for handler, instructions in handlers.items():
        b.block(handler, handler, instructions)
        b.edge("dispatch", handler, INDIRECT)
        b.edge(handler, "after_dispatch", EdgeKind.RETURN)
    trace = ("main_entry", "dispatch", "on_write", "after_dispatch", "table_jump", "case_large", "main_exit")
    return Demo("dyndispatch", b.build("main_entry"), trace)


def loop_ecall(iterations: int = 1000) -> Demo:
    """A loop whose latch is a measurement point, executed the given number of times."""
    b = CfgBuilder()
    b.block("main_entry", "main", ["ecall"], measurement_point=True)
    b.block("prepare", "main", ["addi", "addi"])
    b.block("loop_latch", "main", ["ecall", "addi", "bne"], measurement_point=True)
    b.block("loop_body", "main", ["lw", "add", "sw", "jal"])
    b.block("finish", "main", ["sw"])
    b.block("main_exit", "main", ["ecall"], measurement_point=True)
    b.chain("main_entry", "prepare", "loop_latch")
    b.edge("loop_latch", "loop_body", BRANCH).edge("loop_body", "loop_latch", BRANCH)
    b.edge("loop_latch", "finish", BRANCH).chain("finish", "main_exit")
    steps = ["main_entry", "prepare", "loop_latch"]
    for _ in range(iterations):
        steps += ["loop_body", "loop_latch"]
    steps += ["finish", "main_exit"]
    return Demo("loop-ecall", b.build("main_entry"), tuple(steps))


def explosion(diamonds: int = 18, measurement_every: int | None = None) -> Demo:
    """
    A chain of if/else diamonds: 2**diamonds simple paths unless measurement
    points are placed after every few diamonds.
    """
    b = CfgBuilder()
    b.block("main_entry", "main", ["ecall"], measurement_point=True)
    previous = "main_entry"
    steps = ["main_entry"]
    for i in range(diamonds):
        b.block(f"test_{i}", "main", ["lw", "beq"])
        b.block(f"then_{i}", "main", ["addi", "jal"])
        b.block(f"else_{i}", "main", ["xor", "sw"])
        b.chain(previous, f"test_{i}")
        b.edge(f"test_{i}", f"then_{i}", BRANCH).edge(f"test_{i}", f"else_{i}", BRANCH)
        is_point = measurement_every is not None and (i + 1) % measurement_every == 0
        join = f"join_{i}"
        b.block(join, "main", ["ecall"] if is_point else ["add"], measurement_point=is_point)
        b.chain(f"then_{i}", join).chain(f"else_{i}", join)
        steps += [f"test_{i}", f"then_{i}" if i % 2 else f"else_{i}", join]
        previous = join
    b.block("main_exit", "main", ["ecall"], measurement_point=True)
    b.chain(previous, "main_exit")
    steps.append("main_exit")
    return Demo("explosion", b.build("main_entry"), tuple(steps))


def entry_only() -> Demo:
    b = CfgBuilder()
    b.block("main_entry", "main", ["ecall"], measurement_point=True)
    return Demo("entry-only", b.build("main_entry"), ("main_entry",))


# Mnemonics the random generator draws block bodies from
_BODY_MNEMONICS = ("add", "addi", "xor", "mul", "div", "lw", "sw", "fence", "csrr", "fadd")


def random_program(rng: random.Random, max_blocks: int = 40, max_functions: int = 4) -> Demo:
    """
    A random recursion-free program. Functions only call functions with a
    higher index, every block falls through towards its function's last
    block, and branches jump backwards to form loops, some of them nested.
    """
    function_count = rng.randint(1, max_functions)
    budget = max(max_blocks - 2, 3 * function_count)
    sizes = [2] * function_count
    for _ in range(budget - sum(sizes)):
        sizes[rng.randrange(function_count)] += 1
    sizes = [min(s, 12) for s in sizes]

    b = CfgBuilder()
    names = [f"f{i}" for i in range(function_count)]
    layout: dict[str, list[str]] = {}
    for index, (name, size) in enumerate(zip(names, sizes)):
        ids = [f"{name}_b{j}" for j in range(size)]
        layout[name] = ids
        points = {j for j in range(1, size - 1) if rng.random() < 0.1}
        if index == 0:
            points |= {0, size - 1}
        for j, block_id in enumerate(ids):
            body = [rng.choice(_BODY_MNEMONICS) for _ in range(rng.randint(1, 4))]
            if j in points:
                body.insert(0, "ecall")
            b.block(block_id, name, body, measurement_point=j in points)

    for index, name in enumerate(names):
        ids = layout[name]
        callees = names[index + 1 :]
        for j in range(len(ids) - 1):
            if callees and j > 0 and rng.random() < 0.25:
                b.call(ids[j], rng.choice(callees), ids[j + 1])
            else:
                b.edge(ids[j], ids[j + 1])
            if rng.random() < 0.2:
                b.edge(ids[j], ids[rng.randint(j + 1, len(ids) - 1)], BRANCH)
        for _ in range(rng.randint(1, 3)):
            if len(ids) > 3:
                source = rng.randint(2, len(ids) - 2)
                target = rng.randint(1, source)
                b.edge(ids[source], ids[target], BRANCH)
                if rng.random() < 0.5:
                    # Inner loop nested in the one just added
                    inner = rng.randint(target, source)
                    b.edge(ids[inner], ids[rng.randint(target, inner)], BRANCH)
        if index > 0:
            b.returns_from(name, ids[-1])
    entry = layout[names[0]][0]
    return Demo(f"random-{rng.randrange(2**32)}", b.build(entry), (entry,))


DEMOS: dict[str, Callable[..., Demo]] = {
    "fig2": fig2,
    "hello": hello,
    "crypto": crypto,
    "crypto-in-loop": partial(crypto, in_loop_measurement_points=True),
    "dyndispatch": dyndispatch,
    "loop-ecall": loop_ecall,
    "explosion": explosion,
    "explosion-split": partial(explosion, measurement_every=6),
    "entry-only": entry_only,
}


def build_demo(name: str, params: Mapping[str, Any] | None = None) -> Demo:
    try:
        factory = DEMOS[name]
    except KeyError:
        raise UnknownDemoError(name, sorted(DEMOS)) from None
    params = dict(params or {})
    try:
        inspect.signature(factory).bind(**params)
    except TypeError as ex:
        raise DemoParameterError(name, str(ex)) from ex
    return factory(**params)
