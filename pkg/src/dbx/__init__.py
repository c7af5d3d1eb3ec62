"""dbx: a SQL compiler and interpreter suite targeting JavaScript.

The pipeline lowers a canonical SQL subset through a chain of
intermediate languages (relational algebra, nested relational algebra,
nested relational calculus, imperative forms) down to emitted
ECMAScript-6 source, with a reference interpreter at every stage and a
differential-testing harness comparing them.
"""

__version__ = "0.1.0"
