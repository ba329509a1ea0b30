"""Unpaired sim-to-real image translation."""
from .corpus import PairedCorpus, from_uint8, load_corpus, make_split, save_corpus, to_uint8
from .estimator import METRIC_COLUMNS, SICGAN, write_metrics_csv
from .layers import (DemodConv2d, Discriminator, DiscriminatorSpec, Generator, GeneratorSpec,
                     ResidualBlock, demodulated_conv, init_weights, standardize)
from .losses import (GanBundle, adversarial_loss, compose_generator_loss, cycle_loss,
                     discriminator_loss, identity_loss, total_generator_loss)
from .selection import select_best_model, selection_score
