"""
Server-side commands: train a field, re-pack a package, compress scalar fields.
"""
import logging

import click

from ndf.basemesh import normalized_problem
from ndf.cli.options import INPUT_FILE, resolve_surface, surface_options
from ndf.errors import UsageError
from ndf.services.package import pack, read_package, section_sizes, write_package
from ndf.services.remesh import ExtractionParams, extract
from ndf.services.scalarfield import (
    DEFAULT_SAMPLES_PER_CHANNEL, DEFAULT_SCALAR_EPOCHS, DEFAULT_SCALAR_FEATURE_DIM, MODES,
    eigenfunction_targets, read_targets, train_scalar,
)
from ndf.services.training import final_losses, save_history, train
from ndf.utils.timing import Timer, echo_results
from ndf.utils.validators import load_training_config

logger = logging.getLogger(__name__)


@click.command('train')
@surface_options
@click.option('--resolution', type=int, default=None, help='Marching-cubes grid resolution.')
@click.option('--faces', type=int, default=None, help='Target base-mesh face count.')
@click.option('--config', 'config_path', type=INPUT_FILE, default=None, help='JSON training config.')
@click.option('--epochs', type=int, default=None, help='Overrides the config epoch count.')
@click.option('--history', type=click.Path(dir_okay=False), default=None, help='Write the loss history CSV.')
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='Output .ndf package.')
@click.pass_context
def train_command(ctx, sdf, grid, mesh, cloud, resolution, faces, config_path, epochs, history, out):
    """Surface -> base mesh -> trained field -> .ndf package."""
    cfg = ctx.obj['config']
    surface = resolve_surface(sdf, grid, mesh, cloud)
    defaults = {'encoding_layers': cfg.NDF_ENCODING_LAYERS, 'feature_dim': cfg.NDF_FEATURE_DIM,
                'hidden': list(cfg.NDF_HIDDEN), 'seed': cfg.NDF_SEED}
    with Timer() as timer:
        base, transform, normalized = normalized_problem(
            surface, resolution or cfg.NDF_RESOLUTION, faces or cfg.NDF_TARGET_FACES)
        config = load_training_config(config_path, normalized, defaults=defaults,
                                      seed=ctx.obj['seed_override'], epochs=epochs)
        field, _, losses = train(normalized, base, config)
        data = pack(field, transform)
        write_package(out, data)
    if history:
        save_history(losses, history)
    last = final_losses(losses)
    echo_results({'vertices': base.n_vertices, 'faces': base.n_faces, 'loss_p': last['loss_p'],
                  'loss_c': last['loss_c'], 'bytes': len(data), 'wall_ms': timer.ms})


@click.command('pack')
@click.argument('package_path', type=INPUT_FILE)
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Re-serialized package.')
@click.option('--drop-scalars', is_flag=True, help='Leave scalar nets out of the output.')
def pack_command(package_path, out, drop_scalars):
    """Print per-section sizes; optionally re-serialize."""
    with Timer() as timer:
        package = read_package(package_path)
        scalar_nets = [] if drop_scalars else package.scalar_nets
        sizes = section_sizes(package.field, package.transform, scalar_nets)
        if out:
            write_package(out, pack(package.field, package.transform, scalar_nets))
    echo_results({**{f'size_{name}': size for name, size in sizes.items()},
                  'scalar_nets': len(scalar_nets), 'bytes': sum(sizes.values()), 'wall_ms': timer.ms})


@click.command('scalar-train')
@click.argument('package_path', type=INPUT_FILE)
@click.option('--targets', 'targets_path', type=INPUT_FILE, default=None,
              help='CSV with face,w1,w2,w3,channel,value.')
@click.option('--eigen', 'eigen_k', type=int, default=None, help='Fit the first K eigenfunctions instead.')
@click.option('--h', type=float, default=0.05, help='Extraction edge length for --eigen (normalized frame).')
@click.option('--samples', type=int, default=DEFAULT_SAMPLES_PER_CHANNEL, help='Samples per eigenfunction.')
@click.option('--mode', type=click.Choice(MODES), default='continuous')
@click.option('--epochs', type=int, default=DEFAULT_SCALAR_EPOCHS)
@click.option('--lr', type=float, default=1e-3)
@click.option('--feature-dim', type=int, default=DEFAULT_SCALAR_FEATURE_DIM)
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Defaults to overwriting the input.')
@click.pass_context
def scalar_train_command(ctx, package_path, targets_path, eigen_k, h, samples, mode, epochs, lr, feature_dim, out):
    """Train a scalar net over the package's base mesh and append it."""
    cfg = ctx.obj['config']
    seed = ctx.obj['seed']
    if (targets_path is None) == (eigen_k is None):
        raise UsageError("Give exactly one of --targets or --eigen")
    with Timer() as timer:
        package = read_package(package_path)
        if eigen_k is not None:
            mesh = extract(package.field, ExtractionParams(h, cfg.NDF_EXTRACT_ITERATIONS))
            targets = eigenfunction_targets(package.field, mesh, eigen_k, samples, seed)
        else:
            targets = read_targets(targets_path)
        snet = train_scalar(package.field, targets, mode, epochs, lr, feature_dim, cfg.NDF_SCALAR_HIDDEN,
                            cfg.NDF_ENCODING_LAYERS, seed)
        data = pack(package.field, package.transform, package.scalar_nets + [snet])
        write_package(out or package_path, data)
    echo_results({'channels': snet.channels, 'loss': float(snet.history['loss'].iloc[-1]) if epochs else 0.0,
                  'scalar_nets': len(package.scalar_nets) + 1, 'bytes': len(data),
                  'wall_ms': timer.ms})

