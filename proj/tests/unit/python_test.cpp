#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "swefixer/python/parser.hpp"
#include "swefixer/python/tokenizer.hpp"

using namespace swefixer;

namespace {

bool accepts(const std::string& src) {
  try {
    python::parse_module(src);
    return true;
  } catch (const python::SyntaxError&) {
    return false;
  }
}

const std::vector<std::string>& corpus() {
  static const std::vector<std::string> c = {
      "",
      "x = 1\n",
      "x = 1",
      "def f():\n    return 1\n",
      "def f(:\n",
      "def f()\n    return 1\n",
      "class A:\n    def m(self, x):\n        return x\n",
      "class A(B, metaclass=M):\n    pass\n",
      "class A\n    pass\n",
      "if x:\n    y = 1\nelif z:\n    y = 2\nelse:\n    y = 3\n",
      "if x\n    y = 1\n",
      "for i in range(3):\n    print(i)\nelse:\n    pass\n",
      "while True:\n    break\n",
      "try:\n    f()\nexcept ValueError as e:\n    raise\nfinally:\n    g()\n",
      "try:\n    f()\n",
      "with open(p) as fh, lock:\n    data = fh.read()\n",
      "with (open(p) as a, open(q) as b):\n    pass\n",
      "async def f():\n    await g()\n    async for x in y:\n        pass\n",
      "lambda x, *a, k=1, **kw: x\n",
      "x = [i for i in range(10) if i % 2]\n",
      "x = {k: v for k, v in items}\n",
      "x = {1, 2, 3}\n",
      "x = (yield)\n",
      "def g():\n    yield from h()\n",
      "x = a if b else c\n",
      "x = not a and b or c\n",
      "x = a < b <= c != d is not e not in f\n",
      "x: int = 3\n",
      "f(*args, **kwargs)\n",
      "x = f'value {a!r:>10}'\n",
      "s = '''multi\nline'''\n",
      "s = 'unterminated\n",
      "x = (1,\n     2)\n",
      "x = (1, 2\n",
      "x = 1)\n",
      "  x = 1\n",
      "def f():\nreturn 1\n",
      "def f():\n    x = 1\n  y = 2\n",
      "@decorator\n@other(arg)\ndef f():\n    pass\n",
      "@decorator\nx = 1\n",
      "import os.path as p, sys\n",
      "from . import a\n",
      "from ..pkg import (a, b as c,)\n",
      "from x import *\n",
      "import\n",
      "global a, b\n",
      "del a[0], b.c\n",
      "assert x, 'msg'\n",
      "raise ValueError('x') from e\n",
      "x = a[1:2, ::3]\n",
      "x = 1 +\n",
      "x += 1\n",
      "1 = x\n",
      "f() = 3\n",
      "x = y = z = 0\n",
      "if (n := len(a)) > 10:\n    pass\n",
      "match command:\n    case [x, y, *rest]:\n        pass\n    case {'k': v}:\n        pass\n    case Point(x=0) | None:\n        pass\n    case _:\n        pass\n",
      "match = 3\nmatch(x)\n",
      "x = 0x1F + 0o17 + 0b101 + 1_000 + 1.5e-3 + 2j\n",
      "x = \\\n    1\n",
      "def f(a, /, b, *, c):\n    pass\n",
      "def f(a=1, b):\n    pass\n",
      "return\n",
      "class A:\n    x = 1; y = 2\n",
      "def f(): return 1\n",
      "if x: pass\nelse: pass\n",
      "print 'hello'\n",
      "x = [1, 2,, 3]\n",
      "for x in y\n    pass\n",
      "def f():\n    '''doc'''\n",
      "x = r'\\d+' b'bytes' \n",
      "nonlocal_x = 1\n",
      "x = ...\n",
      "a, *b = c\n",
  };
  return c;
}

}  // namespace

TEST(PythonTokenizer, TracksPositions) {
  auto toks = python::tokenize("def f(x):\n    return x\n");
  ASSERT_GE(toks.size(), 8u);
  EXPECT_EQ(toks[0].type, python::Tok::Name);
  EXPECT_EQ(toks[0].text, "def");
  EXPECT_EQ(toks[0].line, 1);
  EXPECT_EQ(toks[0].col, 0);
  bool saw_indent = false;
  for (const auto& t : toks) saw_indent |= t.type == python::Tok::Indent;
  EXPECT_TRUE(saw_indent);
  EXPECT_EQ(toks.back().type, python::Tok::End);
}

TEST(PythonTokenizer, MultilineStringEndLine) {
  auto toks = python::tokenize("s = '''a\nb\nc'''\n");
  auto it = std::find_if(toks.begin(), toks.end(), [](const auto& t) { return t.type == python::Tok::String; });
  ASSERT_NE(it, toks.end());
  EXPECT_EQ(it->line, 1);
  EXPECT_EQ(it->end_line, 3);
}

TEST(PythonParser, AgreesWithCPythonOnCorpus) {
  const auto& src = corpus();
  auto expected = oracle::python_accepts(src);
  for (std::size_t i = 0; i < src.size(); ++i) {
    EXPECT_EQ(accepts(src[i]), static_cast<bool>(expected[i])) << "source:\n" << src[i];
  }
}

TEST(PythonParser, DefinitionExtents) {
  auto m = python::parse_module(
      "\"\"\"Doc.\"\"\"\n"
      "@dec\n"
      "def f(a,\n"
      "      b):\n"
      "    return a\n"
      "class C:\n"
      "    def m(self): pass\n");
  ASSERT_EQ(m.body.size(), 3u);
  ASSERT_TRUE(m.body[0].string_value);
  EXPECT_EQ(*m.body[0].string_value, "Doc.");
  const auto& f = m.body[1];
  EXPECT_EQ(f.kind, python::Stmt::Kind::Def);
  EXPECT_EQ(f.name, "f");
  EXPECT_EQ(f.first_line, 2);
  EXPECT_EQ(f.header_line, 3);
  EXPECT_EQ(f.header_end_line, 4);
  EXPECT_EQ(f.last_line, 5);
  const auto& c = m.body[2];
  EXPECT_EQ(c.kind, python::Stmt::Kind::Class);
  ASSERT_EQ(c.body.size(), 1u);
  EXPECT_TRUE(c.body[0].inline_body);
  EXPECT_EQ(c.body[0].last_line, 7);
}

TEST(PythonParser, ErrorCarriesPosition) {
  try {
    python::parse_module("x = 1\ndef f(:\n");
    FAIL();
  } catch (const python::SyntaxError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
  }
}
