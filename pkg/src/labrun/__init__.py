"""labrun: parameter studies from expansion to archived, cross-linked results.

The pieces, in pipeline order:

    paramspace   expand a study config into uniquely identified cases
    runner       materialize case directories and execute them
    datastore    collect per-case secondary CSVs into one table
    compare      check that table against a blessed reference
    report       render self-contained HTML reports
    crosslink    milestone tags, artifact manifests, archival tarballs
    recipelint   static checks on container recipes
    api          HTTP status and cancellation endpoint

Each module is importable on its own; the CLI in labrun.cli wires them up.
"""

__version__ = "0.1.0"
