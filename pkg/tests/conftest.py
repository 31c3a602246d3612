import pytest

from progembed import corpus, lexer

# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, label, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {label}: {detail}")


@pytest.fixture(scope="session")
def vocab():
    return lexer.default_vocabulary()


FACTORIAL = (
    "int factorial(int n) {\n"
    "    int result = 1;\n"
    "    for (int i = 2; i <= n; i++) {\n"
    "        result *= i;\n"
    "    }\n"
    "    return result;\n"
    "}\n"
)


@pytest.fixture
def factorial():
    return corpus.MethodText("factorial", FACTORIAL, "fixture:factorial")
