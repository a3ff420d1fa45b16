#!/usr/bin/env python3
"""Writes the synthetic fixture corpora under fixtures/.

Every sample is a small C file with a hand-written textual IR twin
(`<stem>.ll`). Labels are separable by token presence: each label owns a
signature opcode and a set of MPI calls. Within a label, samples sharing a
filler combination differ only in constant values, so their embeddings and
graph shapes coincide.

Run from the repository root:  python3 scripts/gen_synthetic_corpus.py
"""

import itertools
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"
RNG = random.Random(20240611)

MBI_HEADER = """/* ///////////////////////// The MPI Bugs Initiative ////////////////////////

  Origin: synthetic fixture

  Description: {desc}

  BEGIN_MBI_TESTS
    $ mpirun -np 2 ${{EXE}}
    | {verdict}
    | {desc}
  END_MBI_TESTS
//////////////////////       End of MBI headers        /////////////////// */
"""

DECLS = {
    "MPI_Init": "declare i32 @MPI_Init(ptr noundef, ptr noundef)",
    "MPI_Comm_rank": "declare i32 @MPI_Comm_rank(ptr noundef, ptr noundef)",
    "MPI_Finalize": "declare i32 @MPI_Finalize()",
    "MPI_Send": "declare i32 @MPI_Send(ptr noundef, i32 noundef, ptr noundef, i32 noundef, i32 noundef, ptr noundef)",
    "MPI_Recv": "declare i32 @MPI_Recv(ptr noundef, i32 noundef, ptr noundef, i32 noundef, i32 noundef, ptr noundef, ptr noundef)",
    "MPI_Barrier": "declare i32 @MPI_Barrier(ptr noundef)",
    "MPI_Bcast": "declare i32 @MPI_Bcast(ptr noundef, i32 noundef, ptr noundef, i32 noundef, ptr noundef)",
    "MPI_Reduce": "declare i32 @MPI_Reduce(ptr noundef, ptr noundef, i32 noundef, ptr noundef, ptr noundef, i32 noundef, ptr noundef)",
    "MPI_Isend": "declare i32 @MPI_Isend(ptr noundef, i32 noundef, ptr noundef, i32 noundef, i32 noundef, ptr noundef, ptr noundef)",
    "MPI_Wait": "declare i32 @MPI_Wait(ptr noundef, ptr noundef)",
    "MPI_Win_create": "declare i32 @MPI_Win_create(ptr noundef, i64 noundef, i32 noundef, ptr noundef, ptr noundef, ptr noundef)",
    "MPI_Win_fence": "declare i32 @MPI_Win_fence(i32 noundef, ptr noundef)",
    "MPI_Put": "declare i32 @MPI_Put(ptr noundef, i32 noundef, ptr noundef, i32 noundef, i64 noundef, i32 noundef, ptr noundef, ptr noundef)",
    "MPI_Win_free": "declare i32 @MPI_Win_free(ptr noundef)",
    "MPI_Allreduce": "declare i32 @MPI_Allreduce(ptr noundef, ptr noundef, i32 noundef, ptr noundef, ptr noundef, ptr noundef)",
    "MPI_Abort": "declare i32 @MPI_Abort(ptr noundef, i32 noundef)",
}

GLOBALS = """%struct.ompi_predefined_communicator_t = type opaque
%struct.ompi_predefined_datatype_t = type opaque
%struct.ompi_predefined_op_t = type opaque
%struct.ompi_predefined_info_t = type opaque

@ompi_mpi_comm_world = external global %struct.ompi_predefined_communicator_t, align 1
@ompi_mpi_int = external global %struct.ompi_predefined_datatype_t, align 1
@ompi_mpi_op_sum = external global %struct.ompi_predefined_op_t, align 1
@ompi_mpi_info_null = external global %struct.ompi_predefined_info_t, align 1
"""


def c():
    """A fresh constant; twins differ only here."""
    return RNG.randint(2, 97)


# --- label bodies: (extra allocas, body lines, C body, MPI calls used) -------

def body_correct():
    n, tag = c(), c()
    ir = f"""  %isroot = icmp eq i32 %r, 0
  br i1 %isroot, label %send, label %recv

send:
  %s = call i32 @MPI_Send(ptr noundef %buf, i32 noundef {n}, ptr noundef @ompi_mpi_int, i32 noundef 1, i32 noundef {tag}, ptr noundef @ompi_mpi_comm_world)
  br label %join

recv:
  %q = call i32 @MPI_Recv(ptr noundef %buf, i32 noundef {n}, ptr noundef @ompi_mpi_int, i32 noundef 0, i32 noundef {tag}, ptr noundef @ompi_mpi_comm_world, ptr noundef null)
  br label %join

join:
  %b = call i32 @MPI_Barrier(ptr noundef @ompi_mpi_comm_world)"""
    csrc = f"""  if (rank == 0)
    MPI_Send(buf, {n}, MPI_INT, 1, {tag}, MPI_COMM_WORLD);
  else
    MPI_Recv(buf, {n}, MPI_INT, 0, {tag}, MPI_COMM_WORLD, MPI_STATUS_IGNORE);
  MPI_Barrier(MPI_COMM_WORLD);"""
    return "", ir, csrc, ["MPI_Send", "MPI_Recv", "MPI_Barrier"]


def body_call_ordering():
    n = c()
    ir = f"""  switch i32 %r, label %other [
    i32 0, label %root
  ]

root:
  %bc = call i32 @MPI_Bcast(ptr noundef %buf, i32 noundef {n}, ptr noundef @ompi_mpi_int, i32 noundef 0, ptr noundef @ompi_mpi_comm_world)
  br label %join

other:
  %rd = call i32 @MPI_Reduce(ptr noundef %buf, ptr noundef %out, i32 noundef {n}, ptr noundef @ompi_mpi_int, ptr noundef @ompi_mpi_op_sum, i32 noundef 0, ptr noundef @ompi_mpi_comm_world)
  br label %join

join:"""
    csrc = f"""  switch (rank) {{
  case 0:
    MPI_Bcast(buf, {n}, MPI_INT, 0, MPI_COMM_WORLD); /* collective mismatch */
    break;
  default:
    MPI_Reduce(buf, out, {n}, MPI_INT, MPI_SUM, 0, MPI_COMM_WORLD);
  }}"""
    return "  %out = alloca [16 x i32], align 16\n", ir, csrc, ["MPI_Bcast", "MPI_Reduce"]


def body_local_concurrency():
    n, tag, v = c(), c(), c()
    ir = f"""  %is = call i32 @MPI_Isend(ptr noundef %buf, i32 noundef {n}, ptr noundef @ompi_mpi_int, i32 noundef 1, i32 noundef {tag}, ptr noundef @ompi_mpi_comm_world, ptr noundef %req)
  %old = atomicrmw add ptr %buf, i32 {v} seq_cst, align 4
  %w = call i32 @MPI_Wait(ptr noundef %req, ptr noundef null)"""
    csrc = f"""  MPI_Isend(buf, {n}, MPI_INT, 1, {tag}, MPI_COMM_WORLD, &req);
  __atomic_fetch_add(&buf[0], {v}, __ATOMIC_SEQ_CST); /* buffer written before completion */
  MPI_Wait(&req, MPI_STATUS_IGNORE);"""
    return "  %req = alloca ptr, align 8\n", ir, csrc, ["MPI_Isend", "MPI_Wait"]


def body_global_concurrency():
    n, v = c(), c()
    ir = f"""  %wc = call i32 @MPI_Win_create(ptr noundef %buf, i64 noundef 64, i32 noundef 4, ptr noundef @ompi_mpi_info_null, ptr noundef @ompi_mpi_comm_world, ptr noundef %win)
  %wv = load ptr, ptr %win, align 8
  %f1 = call i32 @MPI_Win_fence(i32 noundef 0, ptr noundef %wv)
  %p = call i32 @MPI_Put(ptr noundef %buf, i32 noundef {n}, ptr noundef @ompi_mpi_int, i32 noundef 1, i64 noundef 0, i32 noundef {n}, ptr noundef @ompi_mpi_int, ptr noundef %wv)
  fence seq_cst
  store i32 {v}, ptr %buf, align 4
  %f2 = call i32 @MPI_Win_fence(i32 noundef 0, ptr noundef %wv)
  %wf = call i32 @MPI_Win_free(ptr noundef %win)"""
    csrc = f"""  MPI_Win_create(buf, 64, 4, MPI_INFO_NULL, MPI_COMM_WORLD, &win);
  MPI_Win_fence(0, win);
  MPI_Put(buf, {n}, MPI_INT, 1, 0, {n}, MPI_INT, win);
  __atomic_thread_fence(__ATOMIC_SEQ_CST);
  buf[0] = {v}; /* local store races with the pending put */
  MPI_Win_fence(0, win);
  MPI_Win_free(&win);"""
    return "  %win = alloca ptr, align 8\n", ir, csrc, ["MPI_Win_create", "MPI_Win_fence", "MPI_Put", "MPI_Win_free"]


# CorrBench-style bodies: one signature opcode each
def corr_body(kind):
    n, tag = c(), c()
    send = (f"  %s = call i32 @MPI_Send(ptr noundef %buf, i32 noundef %cnt, ptr noundef @ompi_mpi_int, "
            f"i32 noundef 1, i32 noundef {tag}, ptr noundef @ompi_mpi_comm_world)")
    if kind == "correct":
        ir = f"""  %big = icmp sgt i32 %r, {n}
  %cnt = select i1 %big, i32 {n}, i32 %r
{send}
  %ar = call i32 @MPI_Allreduce(ptr noundef %buf, ptr noundef %buf, i32 noundef 1, ptr noundef @ompi_mpi_int, ptr noundef @ompi_mpi_op_sum, ptr noundef @ompi_mpi_comm_world)"""
        csrc = f"""  int cnt = rank > {n} ? {n} : rank;
  MPI_Send(buf, cnt, MPI_INT, 1, {tag}, MPI_COMM_WORLD);
  MPI_Allreduce(MPI_IN_PLACE, buf, 1, MPI_INT, MPI_SUM, MPI_COMM_WORLD);"""
        return ir, csrc, ["MPI_Send", "MPI_Allreduce"]
    if kind == "ArgError":
        ir = f"""  %cnt = sub nsw i32 %r, {n}
{send}"""
        csrc = f"""  int cnt = rank - {n}; /* negative count */
  MPI_Send(buf, cnt, MPI_INT, 1, {tag}, MPI_COMM_WORLD);"""
        return ir, csrc, ["MPI_Send"]
    if kind == "ArgMismatch":
        ir = f"""  %w64 = sext i32 %r to i64
  %cnt = trunc i64 %w64 to i32
{send}
  %q = call i32 @MPI_Recv(ptr noundef %buf, i32 noundef {n}, ptr noundef @ompi_mpi_int, i32 noundef 0, i32 noundef {tag + 1}, ptr noundef @ompi_mpi_comm_world, ptr noundef null)"""
        csrc = f"""  int cnt = (int)(long)rank;
  MPI_Send(buf, cnt, MPI_INT, 1, {tag}, MPI_COMM_WORLD);
  MPI_Recv(buf, {n}, MPI_INT, 0, {tag + 1}, MPI_COMM_WORLD, MPI_STATUS_IGNORE); /* tag mismatch */"""
        return ir, csrc, ["MPI_Send", "MPI_Recv"]
    if kind == "MissingCall":
        ir = f"""  %cnt = urem i32 %r, {n}
{send}
  %ab = call i32 @MPI_Abort(ptr noundef @ompi_mpi_comm_world, i32 noundef 1)"""
        csrc = f"""  int cnt = rank % {n};
  MPI_Send(buf, cnt, MPI_INT, 1, {tag}, MPI_COMM_WORLD);
  MPI_Abort(MPI_COMM_WORLD, 1); /* request never completed */"""
        return ir, csrc, ["MPI_Send", "MPI_Abort"]
    if kind == "MissplacedCall":
        ir = f"""  %cnt = xor i32 %r, {n}
{send}
  %b = call i32 @MPI_Barrier(ptr noundef @ompi_mpi_comm_world)"""
        csrc = f"""  int cnt = rank ^ {n};
  MPI_Send(buf, cnt, MPI_INT, 1, {tag}, MPI_COMM_WORLD);
  MPI_Barrier(MPI_COMM_WORLD); /* after finalize in the original */"""
        return ir, csrc, ["MPI_Send", "MPI_Barrier"]
    raise ValueError(kind)


def filler(add_mul, loop):
    ir, csrc = [], []
    if add_mul:
        a, b = c(), c()
        ir.append(f"""  %t0 = add nsw i32 %r, {a}
  %t1 = mul nsw i32 %t0, {b}
  store i32 %t1, ptr %buf, align 4""")
        csrc.append(f"  buf[0] = (rank + {a}) * {b};")
    if loop:
        bound = c()
        ir.append(f"""  br label %loop

loop:
  %i = phi i32 [ 0, %entry ], [ %inc, %loop ]
  %inc = add nsw i32 %i, 1
  %cont = icmp slt i32 %inc, {bound}
  br i1 %cont, label %loop, label %done

done:""")
        csrc.append(f"  for (int i = 1; i < {bound}; i++) {{ }}")
    return "\n".join(ir), "\n".join(csrc)


def module(stem, allocas, fill_ir, body_ir, calls, tail_ir=""):
    calls = ["MPI_Init", "MPI_Comm_rank"] + calls + ["MPI_Finalize"]
    decls = "\n".join(DECLS[name] for name in dict.fromkeys(calls))
    parts = [p for p in (fill_ir, body_ir, tail_ir) if p]
    return f"""; ModuleID = '{stem}.c'
source_filename = "{stem}.c"
target triple = "x86_64-pc-linux-gnu"

{GLOBALS}
define dso_local i32 @main(i32 noundef %argc, ptr noundef %argv) #0 {{
entry:
  %argc.addr = alloca i32, align 4
  %argv.addr = alloca ptr, align 8
  %rank = alloca i32, align 4
  %buf = alloca [16 x i32], align 16
{allocas}  store i32 %argc, ptr %argc.addr, align 4
  store ptr %argv, ptr %argv.addr, align 8
  %call = call i32 @MPI_Init(ptr noundef %argc.addr, ptr noundef %argv.addr)
  %call1 = call i32 @MPI_Comm_rank(ptr noundef @ompi_mpi_comm_world, ptr noundef %rank)
  %r = load i32, ptr %rank, align 4, !tbaa !5
{chr(10).join(parts)}
  %fin = call i32 @MPI_Finalize()
  ret i32 0
}}

{decls}

attributes #0 = {{ noinline nounwind optnone uwtable }}

!5 = !{{!"int", !6, i64 0}}
!6 = !{{!"omnipotent char"}}
"""


def c_source(header, decls_c, fill_c, body_c, includes=("<mpi.h>",)):
    inc = "\n".join(f"#include {i}" for i in includes)
    return f"""{header}{inc}

int main(int argc, char **argv) {{
  int rank;
  int buf[16];
{decls_c}  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
{fill_c + chr(10) if fill_c else ""}{body_c}
  MPI_Finalize();
  return 0;
}}
"""


MBI_LABELS = [
    # (label, header verdict, count, body fn, C declarations)
    ("Correct", "OK", 24, body_correct, ""),
    ("CallOrdering", "ERROR: CallMatching", 12, body_call_ordering, "  int out[16];\n"),
    ("LocalConcurrency", "ERROR: LocalConcurrency", 12, body_local_concurrency, "  MPI_Request req;\n"),
    ("GlobalConcurrency", "ERROR: GlobalConcurrency", 12, body_global_concurrency, "  MPI_Win win;\n"),
]


def write_mbi():
    out = ROOT / "synthetic" / "mbi"
    out.mkdir(parents=True, exist_ok=True)
    combos = list(itertools.product([0, 1], [0, 1]))
    for label, verdict, count, body, cdecl in MBI_LABELS:
        for i in range(count):
            add_mul, loop = combos[i % 4]
            stem = f"{label}_{i:02d}"
            allocas, body_ir, body_c, calls = body()
            fill_ir, fill_c = filler(add_mul, loop)
            desc = "No error" if label == "Correct" else f"Synthetic {label} pattern"
            header = MBI_HEADER.format(verdict=verdict, desc=desc)
            (out / f"{stem}.c").write_text(c_source(header, cdecl, fill_c, body_c))
            (out / f"{stem}.ll").write_text(module(stem, allocas, fill_ir, body_ir, calls))


CORR_LABELS = [("correct", 6), ("ArgError", 3), ("ArgMismatch", 3), ("MissingCall", 3), ("MissplacedCall", 3)]


def write_corrbench():
    base = ROOT / "synthetic" / "corrbench"
    names = {
        "ArgError": "MPISend-Count",
        "ArgMismatch": "MPIRecv-Tag",
        "MissingCall": "MPIWait",
        "MissplacedCall": "MPIBarrier",
    }
    for kind, count in CORR_LABELS:
        for i in range(count):
            body_ir, body_c, calls = corr_body(kind)
            fill_ir, fill_c = filler(i % 2, 0)
            if kind == "correct":
                d = base / "correct"
                stem = f"send_allreduce_{i + 1}"
                includes = ("<mpi.h>", '"mpitest.h"')
            else:
                d = base
                stem = f"{kind}-{names[kind]}-{i + 1}"
                includes = ("<mpi.h>",)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{stem}.c").write_text(c_source("", "", fill_c, body_c, includes))
            (d / f"{stem}.ll").write_text(module(stem, "", fill_ir, body_ir, calls))
    (base / "notes.txt").write_text("Level-zero codes only.\n")
    (base / "correct" / "mpitest.h").write_text("/* test harness helpers */\n#define MTEST_OK 0\n")


def write_mbi_mock():
    """Header variants for ingestion tests; no IR needed."""
    d = ROOT / "mbi_mock"
    d.mkdir(parents=True, exist_ok=True)
    body = "#include <mpi.h>\nint main(int argc, char **argv) { MPI_Init(&argc, &argv); MPI_Finalize(); return 0; }\n"
    variants = {
        "ok_barrier.c": MBI_HEADER.format(verdict="OK", desc="Correct barrier"),
        "collective_order.c": MBI_HEADER.format(verdict="ERROR: CallMatching", desc="Bcast vs Reduce"),
        "invalid_count.c": MBI_HEADER.format(verdict="ERROR: InvalidParam", desc="Negative count"),
        "leaked_comm.c": MBI_HEADER.format(verdict="ERROR: ResLeak", desc="Comm never freed"),
        "buffering.c": MBI_HEADER.format(verdict="ERROR: BufferingHazard", desc="Unmapped class"),
        "no_header.c": "",
    }
    for name, header in variants.items():
        (d / name).write_text(header + body)


if __name__ == "__main__":
    write_mbi()
    write_corrbench()
    write_mbi_mock()
