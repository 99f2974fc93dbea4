"""Command line front end.

Each subcommand prints one JSON status line on stdout.  Exit codes: 0 ok,
1 usage error, 2 data/validation error, 3 numerical failure; errors are
reported as a JSON line on stderr.
"""
from __future__ import annotations

import argparse
import difflib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import audio, embedding, ica, spatial
from .analysis import adaptation_distance, erd_ers, tsne
from .errors import InvalidParameterError, NseError, ParseError
from .pipeline import PipelineConfig, epochs_from, preprocess
from .signal_core import read_eegb, read_events, write_eegb, write_events
from .synthgen import generate, to_continuous

log = logging.getLogger("nse")

COMMANDS = ("synth", "preprocess", "ica-clean", "csp-fit", "embed", "adapt-eval", "erders",
            "tsne", "audio-resample", "audio-denoise", "info")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message)

    def parse_args(self, args=None, namespace=None):
        args = list(sys.argv[1:] if args is None else args)
        self._check_flags(args)
        ns, extra = self.parse_known_args(args, namespace)
        if extra:
            known = [o for a in self._all_actions() for o in a.option_strings]
            hints = []
            for tok in extra:
                close = difflib.get_close_matches(tok.split("=")[0], known, n=1)
                hints.append(f"{tok!r}" + (f" (did you mean {close[0]}?)" if close else ""))
            raise UsageError("unrecognized argument(s): " + ", ".join(hints))
        return ns

    def _check_flags(self, args):
        subs = next((a for a in self._actions if isinstance(a, argparse._SubParsersAction)), None)
        if subs is None or not args or args[0] not in subs.choices:
            return
        known = [o for a in subs.choices[args[0]]._actions for o in a.option_strings]
        for tok in args[1:]:
            if tok == "--":
                break
            flag = tok.split("=")[0]
            if flag.startswith("--") and flag not in known:
                close = difflib.get_close_matches(flag, known, n=1)
                raise UsageError(f"unknown flag {flag!r} for {args[0]}"
                                 + (f" (did you mean {close[0]}?)" if close else ""))

    def _all_actions(self):
        acts = list(self._actions)
        for a in self._actions:
            if isinstance(a, argparse._SubParsersAction):
                for sub in a.choices.values():
                    acts.extend(sub._actions)
        return acts


def _common(p):
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", type=Path, required=True)


def build_parser():
    parser = _Parser(prog="nse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write synthetic imagined/spoken recordings")
    _common(p)

    p = sub.add_parser("preprocess", help="notch, bandpass and baseline-correct a recording")
    _common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--events", type=Path)

    p = sub.add_parser("ica-clean", help="remove reference-correlated ICA components")
    _common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--references", type=Path, required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--components", type=int)
    p.add_argument("--model-out", type=Path)

    p = sub.add_parser("csp-fit", help="fit a one-vs-rest CSP filter bank")
    _common(p)
    p.add_argument("--epochs", type=Path, required=True)
    p.add_argument("--events", type=Path)
    p.add_argument("--patterns-per-class", type=int)
    p.add_argument("--domain", choices=("imagined", "spoken"))

    p = sub.add_parser("embed", help="log-variance embeddings through a filter bank")
    _common(p)
    p.add_argument("--epochs", type=Path, required=True)
    p.add_argument("--events", type=Path)
    p.add_argument("--bank", type=Path, required=True)
    p.add_argument("--n-windows", type=int)
    p.add_argument("--domain", choices=("imagined", "spoken"))
    p.add_argument("--csv", type=Path, help="also export a CSV table")

    p = sub.add_parser("adapt-eval", help="shared vs per-domain filter banks")
    _common(p)
    p.add_argument("--imagined", type=Path, required=True)
    p.add_argument("--spoken", type=Path, required=True)
    p.add_argument("--imagined-events", type=Path)
    p.add_argument("--spoken-events", type=Path)
    p.add_argument("--tsne-iterations", type=int)

    p = sub.add_parser("erders", help="ERD/ERS band x time grid as CSV")
    _common(p)
    p.add_argument("--epochs", type=Path, required=True)
    p.add_argument("--events", type=Path)
    p.add_argument("--channel", type=int)

    p = sub.add_parser("tsne", help="2-D t-SNE of an embedding file")
    _common(p)
    p.add_argument("--embeddings", type=Path, required=True)
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iterations", type=int)

    p = sub.add_parser("audio-resample", help="resample a WAV file")
    _common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--target-hz", type=int)
    p.add_argument("--float", action="store_true", help="write IEEE float32 instead of PCM16")

    p = sub.add_parser("audio-denoise", help="resample then spectral-gate a WAV file")
    _common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--noise", type=Path)
    p.add_argument("--target-hz", type=int)
    p.add_argument("--float", action="store_true")

    p = sub.add_parser("info", help="describe a file produced by this tool")
    p.add_argument("path", type=Path)
    return parser


# ---------------------------------------------------------------- helpers

def _config(args):
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    return cfg.override(seed=getattr(args, "seed", None))


def _events_path(eegb, explicit=None):
    if explicit is not None:
        return explicit
    return eegb.with_name(eegb.stem + "_events.csv")


def _domain(path, explicit=None):
    if explicit:
        return explicit
    stem = path.stem.lower()
    return "spoken" if "spoken" in stem else "imagined"


def _load_epochs(path, events_path, cfg, domain):
    rec = read_eegb(path)
    events = read_events(_events_path(path, events_path))
    return epochs_from(rec, events, cfg, domain)


def _write_json(path, obj):
    path.write_text(json.dumps(obj, sort_keys=True) + "\n")


def _tsne_csv(path, ms, result):
    with open(path, "w") as fh:
        fh.write("epoch_id,label,domain,x,y\n")
        for m, (x, y) in zip(ms, result.points):
            fh.write(f"{m.epoch_id},{m.label},{m.domain},{x!r},{y!r}\n")


def _perplexity(cfg, n):
    # keep perplexity inside (0, (n - 1) / 3)
    return min(cfg.tsne_perplexity, (n - 1) / 3.0 - 1e-6)


# ---------------------------------------------------------------- commands

def cmd_synth(args, cfg):
    args.out.mkdir(parents=True, exist_ok=True)
    spec = cfg.synth_spec()
    imagined, spoken, truth = generate(spec)
    outputs = []
    for key, eps in enumerate((imagined, spoken)):
        name = eps.domain[0]
        rec, events = to_continuous(eps, spec, cfg.baseline_seconds, domain_key=key)
        write_eegb(rec, args.out / f"{name}.eegb")
        write_events(events, args.out / f"{name}_events.csv")
        outputs += [f"{name}.eegb", f"{name}_events.csv"]
    (args.out / "ground_truth.json").write_text(truth.to_json() + "\n")
    outputs.append("ground_truth.json")
    return {"outputs": [str(args.out / o) for o in outputs], "n_epochs": int(imagined.n_epochs)}


def cmd_preprocess(args, cfg):
    rec = read_eegb(args.input)
    events = read_events(_events_path(args.input, args.events))
    cfg = cfg.override(fs_hz=rec.sample_rate_hz)
    out = preprocess(rec, events, cfg)
    write_eegb(out, args.out)
    ev_out = _events_path(args.out)
    write_events(events, ev_out)
    return {"outputs": [str(args.out), str(ev_out)], "n_events": len(events)}


def cmd_ica_clean(args, cfg):
    cfg = cfg.override(ica_threshold=args.threshold, ica_components=args.components)
    rec = read_eegb(args.input)
    refs = read_eegb(args.references)
    model = ica.fit_ica(rec, cfg.ica_components, seed=cfg.seed)
    rejected, _ = ica.artifact_components(model, rec, refs, cfg.ica_threshold)
    out = ica.reject_components(model, rec, refs, cfg.ica_threshold)
    write_eegb(out, args.out)
    outputs = [str(args.out)]
    if args.model_out:
        args.model_out.write_text(model.to_json() + "\n")
        outputs.append(str(args.model_out))
    return {"outputs": outputs, "k": model.k, "rejected": rejected.tolist()}


def cmd_csp_fit(args, cfg):
    cfg = cfg.override(patterns_per_class=args.patterns_per_class)
    eps = _load_epochs(args.epochs, args.events, cfg, _domain(args.epochs, args.domain))
    bank = spatial.fit_bank(eps, cfg.patterns_per_class, cfg.ridge, n_jobs=args.threads)
    _write_json(args.out, bank.to_dict())
    return {"outputs": [str(args.out)], "n_filters": bank.n_filters, "n_channels": bank.n_channels}


def cmd_embed(args, cfg):
    cfg = cfg.override(n_windows=args.n_windows)
    eps = _load_epochs(args.epochs, args.events, cfg, _domain(args.epochs, args.domain))
    bank = spatial.SpatialFilterBank.load(args.bank)
    ms = embedding.embed(spatial.project(bank, eps), cfg.n_windows, cfg.eps)
    embedding.save_embeddings(ms, args.out)
    outputs = [str(args.out)]
    if args.csv:
        embedding.export_csv(ms, args.csv)
        outputs.append(str(args.csv))
    shape = list(ms[0].shape) if ms else [cfg.n_windows, bank.n_filters]
    return {"outputs": outputs, "count": len(ms), "shape": shape}


def cmd_adapt_eval(args, cfg):
    cfg = cfg.override(tsne_iterations=args.tsne_iterations)
    args.out.mkdir(parents=True, exist_ok=True)
    im = _load_epochs(args.imagined, args.imagined_events, cfg, "imagined")
    sp = _load_epochs(args.spoken, args.spoken_events, cfg, "spoken")
    shared = spatial.fit_bank(im, cfg.patterns_per_class, cfg.ridge, n_jobs=args.threads)
    own = spatial.fit_bank(sp, cfg.patterns_per_class, cfg.ridge, n_jobs=args.threads)
    e_im = embedding.embed(spatial.project(shared, im), cfg.n_windows, cfg.eps)
    n_im = len(e_im)
    ids = range(n_im, n_im + sp.n_epochs)
    after = e_im + embedding.embed(spatial.project(shared, sp), cfg.n_windows, cfg.eps, ids)
    before = e_im + embedding.embed(spatial.project(own, sp), cfg.n_windows, cfg.eps, ids)
    d_after, d_before = adaptation_distance(after), adaptation_distance(before)

    _write_json(args.out / "shared_bank.json", shared.to_dict())
    _write_json(args.out / "spoken_bank.json", own.to_dict())
    outputs = ["shared_bank.json", "spoken_bank.json"]
    for name, ms in (("before", before), ("after", after)):
        x = embedding.stack(ms)
        res = tsne(x, _perplexity(cfg, len(ms)), cfg.tsne_iterations, cfg.seed,
                   cfg.tsne_learning_rate)
        _tsne_csv(args.out / f"tsne_{name}.csv", ms, res)
        outputs.append(f"tsne_{name}.csv")
    summary = {"shared_distance": d_after, "per_domain_distance": d_before,
               "reduction": 1.0 - d_after / d_before if d_before > 0 else 0.0}
    _write_json(args.out / "adaptation.json", summary)
    outputs.append("adaptation.json")
    return {"outputs": [str(args.out / o) for o in outputs], **summary}


def cmd_erders(args, cfg):
    eps = _load_epochs(args.epochs, args.events, cfg, _domain(args.epochs))
    grid = erd_ers(eps, cfg.erd_band_width_hz, cfg.erd_bin_seconds, tuple(cfg.erd_range_hz),
                   channels=args.channel)
    grid.to_csv(args.out)
    b, t = grid.argmax()
    return {"outputs": [str(args.out)], "shape": list(grid.values.shape),
            "max_band_hz": list(grid.bands[b]), "max_bin_s": list(grid.time_bins[t])}


def cmd_tsne(args, cfg):
    cfg = cfg.override(tsne_perplexity=args.perplexity, tsne_iterations=args.iterations)
    ms = embedding.load_embeddings(args.embeddings)
    res = tsne(embedding.stack(ms), _perplexity(cfg, len(ms)), cfg.tsne_iterations, cfg.seed,
               cfg.tsne_learning_rate)
    _tsne_csv(args.out, ms, res)
    return {"outputs": [str(args.out)], "kl_initial": res.kl_initial, "kl_final": res.kl_final}


def _write_audio(clip, path, as_float):
    audio.write_wav(clip, path, "FLOAT" if as_float else "PCM_16")


def cmd_audio_resample(args, cfg):
    clip = audio.read_wav(args.input)
    out = audio.resample(clip, args.target_hz or cfg.audio_target_hz)
    _write_audio(out, args.out, args.float)
    return {"outputs": [str(args.out)], "sample_rate_hz": out.sample_rate_hz,
            "n_samples": int(out.samples.size), "clipped": out.clipped}


def cmd_audio_denoise(args, cfg):
    clip = audio.read_wav(args.input)
    noise = audio.read_wav(args.noise) if args.noise else None
    out = audio.denoise(clip, noise, args.target_hz or cfg.audio_target_hz)
    _write_audio(out, args.out, args.float)
    return {"outputs": [str(args.out)], "sample_rate_hz": out.sample_rate_hz,
            "n_samples": int(out.samples.size), "clipped": out.clipped}


def cmd_info(args, cfg):
    path = args.path
    head = path.read_bytes()[:4096]
    if head.startswith(b"RIFF"):
        clip = audio.read_wav(path)
        return {"kind": "wav", "sample_rate_hz": clip.sample_rate_hz, "n_samples": int(clip.samples.size)}
    first = head.split(b"\n", 1)[0]
    try:
        header = json.loads(first.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        header = None
    if isinstance(header, dict) and header.get("layout") == "channel_major":
        rec = read_eegb(path)
        return {"kind": "eegb", "fs_hz": rec.sample_rate_hz, "n_channels": rec.n_channels,
                "n_samples": rec.n_samples}
    if isinstance(header, dict) and "n_windows" in header:
        ms = embedding.load_embeddings(path)
        return {"kind": "embeddings", "count": len(ms), "n_windows": header["n_windows"],
                "n_filters": header["n_filters"],
                "domains": sorted({m.domain for m in ms}), "labels": sorted({m.label for m in ms})}
    try:
        d = json.loads(path.read_text())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ParseError(f"{path} is not a recognised file", offset=0) from None
    if isinstance(d, dict) and "filters" in d:
        bank = spatial.SpatialFilterBank.from_dict(d)
        return {"kind": "filter_bank", "n_filters": bank.n_filters, "n_channels": bank.n_channels,
                "patterns_per_class": bank.patterns_per_class, "fitted_domain": bank.fitted_domain}
    if isinstance(d, dict) and "unmixing" in d:
        model = ica.IcaModel.from_json(json.dumps(d))
        return {"kind": "ica_model", "k": model.k, "n_channels": int(model.channel_means.size)}
    if isinstance(d, dict) and "directions" in d:
        return {"kind": "ground_truth", "n_classes": len(d["directions"]),
                "n_channels": len(d["directions"][0])}
    raise ParseError(f"{path} is not a recognised file", offset=0)


HANDLERS = {
    "synth": cmd_synth, "preprocess": cmd_preprocess, "ica-clean": cmd_ica_clean,
    "csp-fit": cmd_csp_fit, "embed": cmd_embed, "adapt-eval": cmd_adapt_eval,
    "erders": cmd_erders, "tsne": cmd_tsne, "audio-resample": cmd_audio_resample,
    "audio-denoise": cmd_audio_denoise, "info": cmd_info,
}


def _setup_logging():
    level = os.environ.get("NSE_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def run(argv=None):
    """Run one subcommand; returns the process exit code."""
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            close = difflib.get_close_matches((argv or [""])[0], COMMANDS, n=1) if argv else []
            raise UsageError("missing subcommand" + (f" (did you mean {close[0]}?)" if close else ""))
        if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as exc:
        print(json.dumps({"status": "error", "error": "UsageError", "message": str(exc)}),
              file=sys.stderr)
        return 1
    try:
        cfg = _config(args) if args.command != "info" else PipelineConfig()
        result = HANDLERS[args.command](args, cfg)
    except NseError as exc:
        print(json.dumps({"status": "error", **exc.to_dict()}), file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(json.dumps({"status": "error", "error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(json.dumps({"status": "error", "error": "LinAlgError", "message": str(exc)}),
              file=sys.stderr)
        return 3
    print(json.dumps({"status": "ok", "command": args.command, **result}, sort_keys=True))
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
