"""Hand-scored cognitive-complexity snippets.

Every expected score below was derived by hand from the normative increment
table (README) before the scorer existed; the derivation is spelled out next
to each case.  Do not regenerate these from the implementation.
"""

CASES = [
    (
        "straight_line",
        "def f(x):\n"
        "    y = x + 1\n"
        "    return y\n",
        # no flow breaks
        0,
    ),
    (
        "loop_nested_conditional",
        "for i in xs:\n"
        "    if i:\n"
        "        y()\n",
        # for 1+0; if 1+1
        3,
    ),
    (
        "loop_double_nested_if",
        "for i in xs:\n"
        "    if a:\n"
        "        if b:\n"
        "            y()\n",
        # for 1; if 1+1; if 1+2
        6,
    ),
    (
        "boolean_run",
        "if a and b and c:\n"
        "    pass\n",
        # if 1; one 'and' sequence 1
        2,
    ),
    (
        "boolean_alternation",
        "if a and b or c and d:\n"
        "    pass\n",
        # if 1; sequences and|or|and -> 3
        4,
    ),
    (
        "elif_ladder",
        "if a:\n"
        "    x()\n"
        "elif b:\n"
        "    y()\n"
        "elif c:\n"
        "    z()\n"
        "else:\n"
        "    w()\n",
        # if 1; elif 1; elif 1; else 1 (all flat)
        4,
    ),
    (
        "while_else",
        "while n:\n"
        "    n -= 1\n"
        "else:\n"
        "    done()\n",
        # while 1; else 1
        2,
    ),
    (
        "ternary_top_level",
        "x = a if cond else b\n",
        # ternary 1+0
        1,
    ),
    (
        "nested_ternary",
        "x = a if c1 else (b if c2 else d)\n",
        # outer ternary 1+0; inner ternary 1+1
        3,
    ),
    (
        "comprehension_guard",
        "ys = [x for x in xs if x > 0]\n",
        # guard scores as conditional 1+0; comprehension itself is shorthand
        1,
    ),
    (
        "comprehension_two_guards",
        "ys = [x for x in xs if x > 0 if x < 9]\n",
        # two guards, 1 each
        2,
    ),
    (
        "except_chain_with_finally",
        "try:\n"
        "    x()\n"
        "except ValueError:\n"
        "    a()\n"
        "except KeyError:\n"
        "    b()\n"
        "finally:\n"
        "    c()\n",
        # two handlers 1+0 each; try/finally free
        2,
    ),
    (
        "handler_inside_loop",
        "for i in xs:\n"
        "    try:\n"
        "        x()\n"
        "    except E:\n"
        "        y()\n",
        # for 1; handler 1+1 (try body does not nest)
        3,
    ),
    (
        "simple_recursion",
        "def fact(n):\n"
        "    if n < 2:\n"
        "        return 1\n"
        "    return n * fact(n - 1)\n",
        # if 1+0; recursion 1
        2,
    ),
    (
        "method_recursion",
        "class S:\n"
        "    def solve(self, n):\n"
        "        if n:\n"
        "            return self.solve(n - 1)\n"
        "        return 0\n",
        # if 1+0 (method body is nesting 0); self-call recursion 1
        2,
    ),
    (
        "nested_function_nests",
        "def outer():\n"
        "    def inner():\n"
        "        if x:\n"
        "            pass\n"
        "    inner()\n",
        # inner's body is inside a nested function: if 1+1
        2,
    ),
    (
        "lambda_nests",
        "def f(v):\n"
        "    g = lambda t: 1 if t else 2\n"
        "    return g(v)\n",
        # lambda body nests inside f: ternary 1+1
        2,
    ),
    (
        "grid_search",
        "def search(grid):\n"
        "    for row in grid:\n"
        "        for cell in row:\n"
        "            if cell and flag:\n"
        "                return cell\n"
        "    return None\n",
        # for 1+0; for 1+1; if 1+2; 'and' sequence 1
        7,
    ),
    (
        "else_wrapping_if",
        "if a:\n"
        "    x()\n"
        "else:\n"
        "    if b:\n"
        "        y()\n",
        # if 1; else 1; inner if 1+1 (else body nests)
        4,
    ),
    (
        "while_bool_ternary",
        "while i < n and not done:\n"
        "    total += arr[i] if arr[i] > 0 else 0\n"
        "    i += 1\n",
        # while 1+0; 'and' sequence 1; ternary in body 1+1
        4,
    ),
]
