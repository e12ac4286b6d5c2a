from .collocation import CollocationSet, generator, sample_collocation, evaluation_points
