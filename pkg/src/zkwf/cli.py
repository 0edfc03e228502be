"""Command line client.

Every networked command resolves its ledger the same way: --ledger-url
beats the config file, the config file beats the ZKWF_LEDGER_URL
environment variable, and --store picks a file-backed in-process ledger
instead.  Exit codes: 2 usage or parse errors, 3 model validation
issues, 4 I/O problems, 5 network failures, 10-13 rejected steps
(transition, authorization, signature, commitment), 14 other ledger
rejections, 15 audit failures.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import httpx
import yaml

from . import __version__, compiler, model, scenario as scen, signing, statecodec
from .ledger import HttpClient, InProcessClient, Ledger, LedgerError
from .participant import (
    ActivateStart,
    AuditError,
    Complete,
    Engine,
    Fake,
    NoAdmissibleStep,
    ParticipantError,
    verify_received_message,
)
from .schedule import VirtualClock, observe, run_ring
from .signing import keypair_from_seed, keygen as new_keypair
from .statement import StatementRejected

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_NETWORK = 5
EXIT_LEDGER = 14
EXIT_AUDIT = 15
_EXIT_BY_CODE = {
    "BAD_TRANSITION": 10,
    "BAD_AUTH": 11,
    "BAD_SIG": 12,
    "HASH_MISMATCH": 13,
}


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as err:
        _fail(EXIT_IO, f"cannot read config: {err}")
    except yaml.YAMLError as err:
        _fail(EXIT_USAGE, f"bad config: {err}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        _fail(EXIT_USAGE, "config must be a mapping")
    return data


def _ledger_client(ledger_url, store, config):
    if ledger_url and store:
        _fail(EXIT_USAGE, "pass either --ledger-url or --store, not both")
    if not ledger_url and not store:
        ledger_url = config.get("ledger_url")
        store = config.get("store")
        if ledger_url and store:
            _fail(EXIT_USAGE, "config sets both ledger_url and store")
    if not ledger_url and not store:
        ledger_url = os.environ.get("ZKWF_LEDGER_URL")
    if ledger_url:
        return HttpClient(base_url=ledger_url)
    if store:
        return InProcessClient(Ledger(store))
    _fail(EXIT_USAGE, "no ledger: pass --ledger-url or --store (or set ZKWF_LEDGER_URL)")


def _resolve_group_key(text: str | None, config: dict) -> bytes:
    text = text or config.get("group_key")
    if not text:
        _fail(EXIT_USAGE, "no group key: pass --group-key (hex, seed:NAME, or @FILE)")
    if text.startswith("seed:"):
        return scen.group_key_from_seed(text[len("seed:"):])
    if text.startswith("@"):
        try:
            text = Path(text[1:]).read_text().strip()
        except OSError as err:
            _fail(EXIT_IO, f"cannot read group key file: {err}")
    try:
        key = bytes.fromhex(text)
    except ValueError:
        _fail(EXIT_USAGE, "group key must be hex, seed:NAME, or @FILE")
    if len(key) != statecodec.GROUP_KEY_LEN:
        _fail(EXIT_USAGE, f"group key must be {statecodec.GROUP_KEY_LEN} bytes")
    return key


def _load_descriptor(model_path: str | None, config: dict) -> compiler.Descriptor:
    model_path = model_path or config.get("model")
    if not model_path:
        _fail(EXIT_USAGE, "no model: pass --model")
    try:
        text = Path(model_path).read_text()
    except OSError as err:
        _fail(EXIT_IO, f"cannot read model: {err}")
    try:
        parsed = model.parse_bpmn(text)
    except model.ParseError as err:
        _fail(EXIT_USAGE, f"model does not parse: {err}")
    issues = model.validate_structure(parsed)
    if issues:
        for issue in issues:
            click.echo(f"{issue.code} {issue.subject}: {issue.detail}", err=True)
        sys.exit(EXIT_VALIDATION)
    return compiler.build_descriptor(parsed)


def _load_keypair(key_file: str | None, config: dict) -> signing.KeyPair:
    key_file = key_file or config.get("key_file")
    if not key_file:
        _fail(EXIT_USAGE, "no key: pass --key-file")
    try:
        return signing.load_key_file(key_file)
    except OSError as err:
        _fail(EXIT_IO, f"cannot read key file: {err}")
    except signing.SigningError as err:
        _fail(EXIT_USAGE, str(err))


def _engine(model_path, key_file, group_key, instance, ledger_url, store, config) -> Engine:
    descriptor = _load_descriptor(model_path, config)
    keypair = _load_keypair(key_file, config)
    client = _ledger_client(ledger_url, store, config)
    instance = instance or config.get("instance")
    if not instance:
        _fail(EXIT_USAGE, "no instance: pass --instance")
    return Engine(descriptor, keypair, _resolve_group_key(group_key, config), instance, client)


def _run_guarded(fn):
    try:
        return fn()
    except NoAdmissibleStep as err:
        _fail(_EXIT_BY_CODE["BAD_TRANSITION"], str(err))
    except AuditError as err:
        _fail(EXIT_AUDIT, str(err))
    except ParticipantError as err:
        _fail(EXIT_USAGE, str(err))
    except StatementRejected as err:
        _fail(_EXIT_BY_CODE[err.reason.value], f"{err.reason.value}: {err.detail}")
    except LedgerError as err:
        _fail(_EXIT_BY_CODE.get(err.code, EXIT_LEDGER), f"{err.code}: {err.message}")
    except httpx.HTTPError as err:
        _fail(EXIT_NETWORK, f"ledger unreachable: {err}")


_shared = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="YAML file with defaults for the other options."),
    click.option("--ledger-url", default=None, help="Base URL of a ledger service."),
    click.option("--store", type=click.Path(), default=None,
                 help="Directory for a local file-backed ledger."),
]


def shared_options(fn):
    for option in reversed(_shared):
        fn = option(fn)
    return fn


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Confidential collaboration workflows over a shared ledger."""


@main.command("compile")
@click.argument("model_file", type=click.Path())
@click.option("-o", "--out", type=click.Path(), default=None,
              help="Write the compiled descriptor JSON here.")
def compile_cmd(model_file, out) -> None:
    """Parse, validate, and compile a BPMN model."""
    descriptor = _load_descriptor(model_file, {})
    digest = compiler.descriptor_digest(descriptor).hex()
    if out:
        try:
            Path(out).write_text(compiler.to_canonical_json(descriptor) + "\n")
        except OSError as err:
            _fail(EXIT_IO, f"cannot write descriptor: {err}")
    click.echo(f"elements: {len(descriptor.elements)}")
    click.echo(f"deltas: {len(descriptor.p_array)}")
    click.echo(f"participants: {len(descriptor.participant_keys)}")
    click.echo(f"digest: {digest}")


@main.command()
@click.option("-o", "--out", type=click.Path(), required=True, help="Key file to write.")
@click.option("--seed", default=None,
              help="Derive a deterministic demo key instead of a random one.")
def keygen(out, seed) -> None:
    """Create a signing key pair and store it in a key file."""
    keypair = keypair_from_seed(seed) if seed else new_keypair()
    try:
        signing.save_key_file(out, keypair)
    except OSError as err:
        _fail(EXIT_IO, f"cannot write key file: {err}")
    click.echo(keypair.pk_hex)


@main.command()
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--instance", default=None)
@click.option("--key-file", type=click.Path(), default=None)
@click.option("--group-key", default=None)
@shared_options
def deploy(model_path, instance, key_file, group_key, config_path, ledger_url, store) -> None:
    """Create an instance on the ledger with a blank genesis state."""
    config = _load_config(config_path)
    engine = _engine(model_path, key_file, group_key, instance, ledger_url, store, config)
    record = _run_guarded(engine.deploy)
    click.echo(f"deployed {engine.instance_id} at seq {record.seq}")
    click.echo(f"h: {record.h.hex()}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--instance", default=None)
@click.option("--key-file", type=click.Path(), default=None)
@click.option("--group-key", default=None)
@click.option("--complete", "complete_id", default=None, help="Complete this element.")
@click.option("--activate", "activate_id", default=None, help="Activate this start event.")
@click.option("--fake", is_flag=True, help="Submit a cover update that changes nothing.")
@click.option("--set", "var_writes", multiple=True, metavar="NAME=VALUE",
              help="Write a variable while completing (repeatable).")
@click.option("--message", default=None,
              help="Message payload for a throw event (@FILE reads bytes from a file).")
@shared_options
def step(model_path, instance, key_file, group_key, complete_id, activate_id, fake,
         var_writes, message, config_path, ledger_url, store) -> None:
    """Submit one workflow step."""
    config = _load_config(config_path)
    chosen = [x for x in (complete_id, activate_id, "fake" if fake else None) if x]
    if len(chosen) != 1:
        _fail(EXIT_USAGE, "pass exactly one of --complete, --activate, --fake")
    if fake:
        action = Fake()
    elif activate_id:
        action = ActivateStart(activate_id)
    else:
        writes = {}
        for pair in var_writes:
            name, eq, value = pair.partition("=")
            if not eq or not name:
                _fail(EXIT_USAGE, f"--set needs NAME=VALUE, got {pair!r}")
            try:
                writes[name] = int(value)
            except ValueError:
                _fail(EXIT_USAGE, f"variable value {value!r} is not an integer")
        payload = None
        if message is not None:
            if message.startswith("@"):
                try:
                    payload = Path(message[1:]).read_bytes()
                except OSError as err:
                    _fail(EXIT_IO, f"cannot read message file: {err}")
            else:
                payload = message.encode()
        action = Complete(complete_id, var_writes=writes, message=payload)
    engine = _engine(model_path, key_file, group_key, instance, ledger_url, store, config)
    record = _run_guarded(lambda: engine.step(action))
    click.echo(f"accepted at seq {record.seq}")
    click.echo(f"h: {record.h.hex()}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--instance", default=None)
@click.option("--group-key", default=None)
@click.option("--history", is_flag=True, help="Also list every record.")
@click.option("--verify-message", "catch_id", default=None,
              help="Check a received payload against this catch event.")
@click.option("--payload", default=None,
              help="Payload for --verify-message (@FILE reads bytes from a file).")
@shared_options
def inspect(model_path, instance, group_key, history, catch_id, payload,
            config_path, ledger_url, store) -> None:
    """Audit an instance and show its decrypted state."""
    config = _load_config(config_path)
    descriptor = _load_descriptor(model_path, config)
    client = _ledger_client(ledger_url, store, config)
    instance = instance or config.get("instance")
    if not instance:
        _fail(EXIT_USAGE, "no instance: pass --instance")
    engine = Engine(descriptor, new_keypair(), _resolve_group_key(group_key, config),
                    instance, client)
    view = _run_guarded(engine.sync)
    click.echo(f"instance {instance} at seq {view.seq}")
    click.echo(f"h: {view.h.hex()}")
    click.echo(scen.format_marking(descriptor, view.state))
    if history:
        for record in _run_guarded(lambda: client.get_history(instance)):
            click.echo(
                f"seq {record.seq} {record.kind} t={record.timestamp:.3f} h={record.h.hex()[:16]}..."
            )
    if catch_id:
        if payload is None:
            _fail(EXIT_USAGE, "--verify-message needs --payload")
        data = Path(payload[1:]).read_bytes() if payload.startswith("@") else payload.encode()
        if verify_received_message(descriptor, view.state, catch_id, data):
            click.echo(f"message for {catch_id}: verified")
        else:
            click.echo(f"message for {catch_id}: MISMATCH", err=True)
            sys.exit(_EXIT_BY_CODE["BAD_TRANSITION"])


@main.command("run-scenario")
@click.argument("scenario_file", type=click.Path())
@click.option("--ledger-url", default=None,
              help="Run against this ledger service instead of in process.")
@click.option("--quiet", is_flag=True, help="Only print the final summary.")
def run_scenario_cmd(scenario_file, ledger_url, quiet) -> None:
    """Execute a scripted YAML scenario (in process, virtual time)."""
    try:
        loaded = scen.load_scenario(scenario_file)
    except OSError as err:
        _fail(EXIT_IO, f"cannot read scenario: {err}")
    except scen.ScenarioError as err:
        _fail(EXIT_USAGE, str(err))
    client = HttpClient(base_url=ledger_url) if ledger_url else None
    result = _run_guarded(lambda: scen.run_scenario(loaded, client=client))
    if not quiet:
        verbs = {"Complete": "complete", "ActivateStart": "activate", "Fake": "fake"}
        for record, step_ in zip(result.records[1:], loaded.steps):
            what = verbs[step_.action.__class__.__name__]
            target = getattr(step_.action, "element_id", "")
            click.echo(f"seq {record.seq}: {step_.participant} {what} {target}".rstrip())
    click.echo(
        f"ran {len(loaded.steps)} steps on {loaded.instance_id} "
        f"in {result.elapsed:.3f}s, final seq {result.final_seq}"
    )
    descriptor = _load_descriptor(str(loaded.model_path), {})
    done = all(result.final_state.v[i] == 2 for i in descriptor.terminal_indices)
    click.echo("workflow completed" if done else "workflow still in progress")


@main.command()
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--instance", default=None)
@click.option("--group-key", default=None)
@click.option("--seeds", required=True,
              help="Comma-separated demo key seeds, one per participant, ring order.")
@click.option("--quantum", default=1.0, show_default=True, help="Epoch length.")
@click.option("--tail", default=3, show_default=True,
              help="Cover epochs after the workflow finishes.")
@click.option("--max-epochs", default=1000, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
def ring(model_path, instance, group_key, seeds, quantum, tail, max_epochs, config_path) -> None:
    """Run a ring-scheduled demo on an in-process virtual-time ledger."""
    config = _load_config(config_path)
    descriptor = _load_descriptor(model_path, config)
    instance = instance or config.get("instance") or "ring-demo"
    key = _resolve_group_key(group_key, config)
    clock = VirtualClock()
    client = InProcessClient(Ledger(clock=clock))
    engines = [
        Engine(descriptor, keypair_from_seed(seed.strip()), key, instance, client)
        for seed in seeds.split(",")
        if seed.strip()
    ]
    if not engines:
        _fail(EXIT_USAGE, "no participants: --seeds is empty")
    missing = set(descriptor.participant_keys) - {e.keypair.pk_hex for e in engines}
    if missing:
        _fail(EXIT_USAGE, f"seeds do not cover {len(missing)} participant key(s)")
    _run_guarded(engines[0].deploy)
    result = _run_guarded(
        lambda: run_ring(engines, clock, quantum=quantum, tail_epochs=tail,
                         max_epochs=max_epochs)
    )
    report = observe(client.get_history(instance), quantum)
    click.echo(
        f"epochs: {result.epochs} (real {result.real_steps}, cover {result.fake_steps})"
    )
    click.echo(f"completed: {'yes' if result.completed else 'no'}")
    counts = set(report.per_epoch_counts)
    click.echo(f"updates per epoch: {sorted(counts)}")
    click.echo(f"inter-arrival variance: {report.inter_arrival_variance}")
    click.echo(f"size variance: {report.size_variance}")


@main.command()
@click.option("--store", type=click.Path(), default=None,
              help="Persist instances in this directory.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8440, show_default=True)
def serve(store, host, port) -> None:
    """Run the ledger HTTP service."""
    import uvicorn

    from .ledger import create_app

    # open event streams block graceful shutdown, so cap it
    uvicorn.run(create_app(Ledger(store)), host=host, port=port, log_level="warning",
                timeout_graceful_shutdown=3)


@main.command()
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--instance", default=None)
@click.option("--key-file", type=click.Path(), default=None)
@click.option("--group-key", default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8441, show_default=True)
@shared_options
def bridge(model_path, instance, key_file, group_key, host, port,
           config_path, ledger_url, store) -> None:
    """Expose one participant's view to the web UI."""
    import uvicorn

    from .bridge import create_bridge_app

    config = _load_config(config_path)
    engine = _engine(model_path, key_file, group_key, instance, ledger_url, store, config)
    uvicorn.run(create_bridge_app(engine), host=host, port=port, log_level="warning",
                timeout_graceful_shutdown=3)


if __name__ == "__main__":
    main()
