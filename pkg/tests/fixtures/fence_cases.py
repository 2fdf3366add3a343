"""25 post bodies with odd backtick-fence parity, each repairable.

Every body has an odd number of triple-backtick fence markers, so the
repair policy always engages: a hinted fence met while a block is open
closes the block just before it; a block still open at end-of-document
closes there.  ``expected`` is the snippet count after the >= 3 content
line filter, worked out by hand against that policy.
"""

# (name, body, expected_snippet_count)
CASES = [
    # one open fence, never closed; 3 content lines run to end-of-document
    (
        "open_never_closed",
        "Intro\n```\na\nb\nc",
        1,
    ),
    # dangling block with only 2 content lines: repaired but below threshold
    (
        "open_short_dangling",
        "x\n```python\na\nb",
        0,
    ),
    # a well-formed block followed by a dangling one
    (
        "closed_plus_dangling",
        "```\na\nb\nc\n```\ntext\n```\nd\ne\nf",
        2,
    ),
    # hinted fence while open: close before it, then open the new block
    (
        "hinted_close_split",
        "```python\na\nb\nc\n```java\nd\ne\nf\n```",
        2,
    ),
    # the split-off second block is too short to emit
    (
        "hinted_split_second_short",
        "```python\na\nb\nc\n```java\nd\n```",
        1,
    ),
    # inline single-backtick spans are prose, not fences
    (
        "prose_with_inline",
        "Use `foo()` here\n```\nq\nw\ne\nr",
        1,
    ),
    # only the first word after the backticks is the language hint
    (
        "trailing_words_after_hint",
        "```python  solution code\nx\ny\nz",
        1,
    ),
    # markers may be indented
    (
        "indented_fence",
        "  ```\n a\n b\n c",
        1,
    ),
    # two complete blocks and a dangling third
    (
        "five_markers_dangling",
        "```\n1\n2\n3\n```\n```\n4\n5\n6\n```\n```\n7\n8\n9",
        3,
    ),
    # the dangling block is empty: repaired, nothing emitted for it
    (
        "empty_dangling",
        "```\na\nb\nc\n```\n```",
        1,
    ),
    # dangling block with a language hint
    (
        "hint_only_dangler",
        "Check this:\n```cpp\n#include <iostream>\nint main() {\n  return 0;\n}",
        1,
    ),
    # prose between a closed block and a dangling hinted one
    (
        "text_between_blocks",
        "intro\n```\na\nb\nc\n```\nmiddle prose\nmore\n```python\nd\ne\nf",
        2,
    ),
    # a closed-but-short block before the dangling long one
    (
        "short_then_long",
        "```\na\n```\n```\nb\nc\nd",
        1,
    ),
    # everything below threshold: repair succeeds, zero snippets
    (
        "all_short",
        "```\na\n```\n```\nb",
        0,
    ),
    # hinted fence on the very next line: the split-off block is empty
    (
        "hinted_degenerate_split",
        "```python\n```java\na\nb\nc\n```",
        1,
    ),
    # blank lines inside a block count as content lines
    (
        "blank_lines_inside",
        "```\na\n\nb\n\nc",
        1,
    ),
    # double-backtick emphasis between blocks is ignored
    (
        "double_backtick_prose",
        "```\nx\ny\nz\n```\nsee ``tip`` here\n```\np\nq\nr",
        2,
    ),
    # tilde fences are not part of the model; treated as prose
    (
        "tilde_fences_ignored",
        "~~~\nnot a fence\n~~~\n```\na\nb\nc",
        1,
    ),
    # three complete blocks and an empty-ish dangler below threshold
    (
        "seven_markers",
        "```\n1\n2\n3\n```\nmid\n```java\n4\n5\n6\n```\n```\n7\n8\n9\n```\n```\nzz",
        3,
    ),
    # carriage returns ride along inside lines without breaking markers
    (
        "crlf_body",
        "```\r\na\r\nb\r\nc",
        1,
    ),
    # a mid-line triple backtick is not a fence marker
    (
        "fence_midline_not_marker",
        "code ``` not fence\n```\na\nb\nc",
        1,
    ),
    # long dangling block
    (
        "long_dangler",
        "Explanation first.\n```python\n"
        + "\n".join(f"line_{i} = {i}" for i in range(10)),
        1,
    ),
    # chain of hinted fences: every one closes its predecessor
    (
        "hinted_close_chain",
        "```python\na\nb\nc\n```cpp\nd\ne\nf\n```java\ng\nh\ni",
        3,
    ),
    # realistic solution-post shape with a trailing unclosed debug block
    (
        "upvoted_solution_shape",
        "# Solution\n\nMy approach:\n\n```python\nclass Solution:\n"
        "    def twoSum(self, nums, target):\n        return []\n```\n\n"
        "Note: complexity `O(n)`\n```\nextra\ndebug\noutput",
        2,
    ),
    # whitespace after the backticks means no hint
    (
        "whitespace_hint",
        "```   \nm\nn\no",
        1,
    ),
]
