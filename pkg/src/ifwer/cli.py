"""Command line interface: simulation harness, dataset runs, and the service."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .datasets import load_dataset
from .errors import IfwerError
from .masking import MaskingScheme
from .session import Session, SessionConfig
from .shrinkers import make_strategy, run_until_stop
from .simulation import (
    ExperimentConfig,
    GridSpec,
    MethodSpec,
    Summary,
    TreeSpec,
    make_scorer,
    run_experiment,
)


def _build_scheme(scheme: str, p_star, p_l, p_u) -> MaskingScheme:
    if scheme in ("tent", "railway"):
        if p_star is None:
            raise click.UsageError(f"--scheme {scheme} requires --p-star")
        return MaskingScheme(scheme, p_star=p_star)
    if scheme in ("gap", "gap_railway"):
        if p_l is None or p_u is None:
            raise click.UsageError(f"--scheme {scheme} requires --p-l and --p-u")
        return MaskingScheme(scheme, p_l=p_l, p_u=p_u)
    raise click.UsageError(f"unknown scheme {scheme!r}")


scheme_options = [
    click.option("--scheme", default="tent", show_default=True,
                 type=click.Choice(["tent", "railway", "gap", "gap_railway"])),
    click.option("--p-star", type=float, default=None, help="Masking threshold (tent/railway)."),
    click.option("--p-l", type=float, default=None, help="Lower gap threshold."),
    click.option("--p-u", type=float, default=None, help="Upper gap threshold."),
]


def add_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn

    return wrap


@click.group()
def main():
    """Interactive multiple testing with familywise error control."""


@main.command()
@click.option("--setting", type=click.Choice(["grid", "tree"]), default="grid", show_default=True)
@click.option("--mu", type=float, default=3.0, show_default=True, help="Non-null mean.")
@click.option("--mu0", type=float, default=0.0, show_default=True, help="Null mean.")
@click.option("--rho", type=float, default=0.0, show_default=True, help="Equi-correlation (grid).")
@click.option("--rows", type=int, default=30, show_default=True)
@click.option("--cols", type=int, default=30, show_default=True)
@add_options(scheme_options)
@click.option("--alpha", type=float, default=0.2, show_default=True)
@click.option("--k", type=int, default=1, show_default=True, help="Error order (k-FWER).")
@click.option("--method", type=click.Choice(["ifwer", "sidak", "holm", "fallback"]),
              default="ifwer", show_default=True)
@click.option("--fallback-v", type=int, default=1, show_default=True,
              help="Failure budget for the fallback baseline.")
@click.option("--strategy", type=click.Choice(["cone_peel", "subtree_prune", "lowest_score"]),
              default=None, help="Defaults to cone_peel (grid) or subtree_prune (tree).")
@click.option("--scorer", type=click.Choice(["neg_g", "em"]), default="neg_g", show_default=True)
@click.option("--reps", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-jobs", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Append the summary row to this CSV (written with header if new).")
def simulate(setting, mu, mu0, rho, rows, cols, scheme, p_star, p_l, p_u, alpha, k,
             method, fallback_v, strategy, scorer, reps, seed, n_jobs, out):
    """Run replicated synthetic experiments and emit one summary row."""
    try:
        if setting == "grid":
            center = ((rows - 1) / 2.0, (cols - 1) / 2.0)
            generator = GridSpec(rows=rows, cols=cols, disc_center=center,
                                 disc_radius=2.5, mu_alt=mu, mu_null=mu0, rho=rho)
        else:
            generator = TreeSpec(mu_alt=mu, mu_null=mu0)
        if strategy is None:
            strategy = "subtree_prune" if setting == "tree" else "cone_peel"
        if method == "ifwer":
            method_spec = MethodSpec(
                kind="ifwer",
                scheme=_build_scheme(scheme, p_star, p_l, p_u),
                strategy=strategy,
                scorer=scorer,
                k=k,
            )
        else:
            method_spec = MethodSpec(kind=method, fallback_v=fallback_v)
        config = ExperimentConfig(
            generator=generator, method=method_spec, alpha=alpha, reps=reps, seed=seed
        )
        summary = run_experiment(config, n_jobs=n_jobs)
    except IfwerError as exc:
        raise click.ClickException(str(exc)) from exc
    row = summary.to_csv_row()
    if out is None:
        click.echo(Summary.CSV_HEADER)
        click.echo(row)
    else:
        fresh = not out.exists() or out.stat().st_size == 0
        with out.open("a") as fh:
            if fresh:
                fh.write(Summary.CSV_HEADER + "\n")
            fh.write(row + "\n")


@main.command()
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@add_options(scheme_options)
@click.option("--alpha", type=float, default=0.2, show_default=True)
@click.option("--k", type=int, default=1, show_default=True)
@click.option("--strategy", type=click.Choice(["cone_peel", "subtree_prune", "lowest_score"]),
              default=None, help="Defaults to subtree_prune for tree data, else lowest_score.")
@click.option("--scorer", type=click.Choice(["neg_g", "em"]), default="neg_g", show_default=True)
@click.option("--batch-size", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--journal", "journal_path", type=click.Path(dir_okay=False, path_type=Path),
              default=None, help="Write the session journal to this file.")
def run(data_path, scheme, p_star, p_l, p_u, alpha, k, strategy, scorer, batch_size,
        seed, journal_path):
    """Automated run on an ingested dataset; prints rejected ids."""
    try:
        dataset = load_dataset(data_path)
        masking = _build_scheme(scheme, p_star, p_l, p_u)
        config = SessionConfig(scheme=masking, alpha=alpha, k=k, rng_seed=seed)
        session = Session(dataset.pvalues, dataset.covariates, config)
        if strategy is None:
            strategy = "subtree_prune" if dataset.kind == "tree" else "lowest_score"
        parent = (
            dataset.covariates[:, 0].astype(np.int64)
            if dataset.covariates.shape[1] >= 1
            else None
        )
        strat = make_strategy(strategy, parent=parent, batch_size=batch_size)
        score_fn = make_scorer(scorer, strategy, dataset.covariates)
        run_until_stop(session, strat, score_fn)
    except IfwerError as exc:
        raise click.ClickException(str(exc)) from exc
    if journal_path is not None:
        journal_path.write_text(session.journal())
    for idx in sorted(session.rejections):
        click.echo(dataset.ids[idx])


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--journal-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Persist session journals here (enables restart recovery).")
@click.option("--static-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Serve a built web frontend from this directory under /ui.")
def serve(host, port, journal_dir, static_dir):
    """Start the HTTP session service."""
    import uvicorn

    from .service import create_app

    app = create_app(journal_dir=journal_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
