import numpy as np
from django.db import models


class FineReference(models.Model):
    """A fine-grid solution kept so coarse-grid studies need not re-solve it."""

    SCHEME_CHOICES = (
        ('bpf', 'BPF'),
        ('fd', 'Classical FD'),
        ('fd-dc', 'Dispersion-corrected FD'),
    )

    problem_key = models.CharField(max_length=64)
    benchmark = models.CharField(max_length=100)
    wavenumber = models.FloatField()
    length = models.FloatField()
    n_ref = models.PositiveIntegerField()
    scheme = models.CharField(max_length=8, choices=SCHEME_CHOICES)
    values = models.BinaryField()  # complex128 nodal values, n_ref + 1 of them
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        constraints = [
            models.UniqueConstraint(
                fields=['problem_key', 'n_ref', 'scheme'],
                name='unique_fine_reference',
            ),
        ]

    def as_array(self):
        values = np.frombuffer(bytes(self.values), dtype=np.complex128)
        if values.shape != (self.n_ref + 1,):
            raise ValueError(
                f"stored reference {self.pk} holds {values.shape[0]} values, "
                f"expected {self.n_ref + 1}"
            )
        return values

    def __str__(self):
        return f"{self.benchmark} k={self.wavenumber:g} n_ref={self.n_ref} ({self.scheme})"
