#!/usr/bin/env python
"""Línea de comandos para ejecutar experimentos, barridos y figuras."""
from __future__ import annotations

import argparse
import logging
import sys

import config as settings
from errors import (
    ArtifactError,
    ConfigError,
    MfBpinnError,
    NumericError,
    SamplerHealthError,
)

logger = logging.getLogger(__name__)

EXIT_CODES = (
    (ConfigError, 2),
    (NumericError, 3),
    (SamplerHealthError, 4),
    (ArtifactError, 5),
)


def exit_code(exc: BaseException) -> int:
    for kind, code in EXIT_CODES:
        if isinstance(exc, kind):
            return code
    return 1


def _run(args: argparse.Namespace) -> int:
    from services.pipeline import run_experiment

    result = run_experiment(args.config, args.output_root)
    print(result.metrics.to_string(index=False))
    print(f"Artefactos en {result.directory}")
    return 0


def _sweep(args: argparse.Namespace) -> int:
    from services.pipeline import run_sweep
    from services.schemas import load_config

    cfg = load_config(args.config)
    if cfg.sweep is None:
        raise ConfigError(f"{args.config} has no sweep section")
    result = run_sweep(cfg, args.output_root)
    print(result.metrics.to_string(index=False))
    print(f"Artefactos en {result.directory}")
    return 0


def _plots(args: argparse.Namespace) -> int:
    from analytics.plot_data import FIGURES, emit_plot_data

    tags = FIGURES if args.figure == "all" else (args.figure,)
    for tag in tags:
        print(emit_plot_data(args.directory, tag, render=args.png))
    return 0


def _validate(args: argparse.Namespace) -> int:
    from services.schemas import load_config

    cfg = load_config(args.config)
    print(f"{args.config}: válido (problema {cfg.problem}, hash {cfg.config_hash()})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Redes físicas multi-fidelidad con incertidumbre bayesiana"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Ejecuta un experimento completo")
    run.add_argument("config", help="Ruta al archivo JSON del experimento")
    run.add_argument(
        "--output-root",
        dest="output_root",
        default=None,
        help="Directorio raíz de resultados (por defecto MFBPINN_OUTPUT_ROOT)",
    )
    run.set_defaults(handler=_run)

    sweep = sub.add_parser("sweep", help="Ejecuta un barrido de semillas o tamaños")
    sweep.add_argument("config", help="Ruta al archivo JSON con sección 'sweep'")
    sweep.add_argument("--output-root", dest="output_root", default=None)
    sweep.set_defaults(handler=_sweep)

    plots = sub.add_parser("plots", help="Exporta tablas para las figuras")
    plots.add_argument("directory", help="Directorio de artefactos del experimento")
    plots.add_argument(
        "figure", choices=["fig1", "fig2", "fig3", "fig4", "all"], help="Figura"
    )
    plots.add_argument("--png", action="store_true", help="Dibuja también un PNG")
    plots.set_defaults(handler=_plots)

    validate = sub.add_parser("validate", help="Valida un archivo de configuración")
    validate.add_argument("config")
    validate.set_defaults(handler=_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format=settings.LOG_FORMAT,
        handlers=[logging.StreamHandler()],
    )
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except MfBpinnError as exc:
        stage = getattr(exc, "stage", None)
        where = f" (etapa {stage})" if stage else ""
        logger.error(f"{type(exc).__name__}{where}: {exc}")
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
