from django.db import models


# One recorded run_zs / run_fs invocation.
class TransductionRun(models.Model):
    COMMAND_CHOICES = [
        ('run_zs', 'Zero-shot transduction'),
        ('run_fs', 'Few-shot transduction'),
    ]

    command = models.CharField(max_length=10, choices=COMMAND_CHOICES)
    query_path = models.CharField(max_length=500)
    text_path = models.CharField(max_length=500)
    support_path = models.CharField(max_length=500, blank=True, default='')
    # Task shape
    n_query = models.PositiveIntegerField()
    n_support = models.PositiveIntegerField(default=0)
    n_classes = models.PositiveIntegerField()
    dim = models.PositiveIntegerField()
    # Hyper-parameters actually used
    tau = models.FloatField()
    lambda_weight = models.FloatField()
    gamma = models.FloatField(default=0.0)
    outer_iters = models.PositiveIntegerField()
    inner_z_iters = models.PositiveIntegerField()
    k_nn = models.PositiveIntegerField()
    top_m_init = models.PositiveIntegerField()
    # Results
    zero_shot_accuracy = models.FloatField(null=True, blank=True, help_text="Top-1 accuracy of the text prior alone, when truth labels were given.")
    transduced_accuracy = models.FloatField(null=True, blank=True, help_text="Top-1 accuracy after transduction, when truth labels were given.")
    final_objective = models.FloatField(null=True, blank=True)
    objective_trace = models.JSONField(default=list, blank=True, help_text="[iteration, block, paper_literal, update_consistent] rows.")
    gamma_scores = models.JSONField(default=list, blank=True, help_text="[gamma, validation_accuracy] rows of the few-shot search.")
    descent_violations = models.PositiveIntegerField(default=0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name = "Transduction Run"
        verbose_name_plural = "Transduction Runs"

    def __str__(self):
        return f"{self.get_command_display()} on {self.query_path} ({self.created_at:%Y-%m-%d %H:%M})"

    @property
    def accuracy_gain(self):
        if self.zero_shot_accuracy is None or self.transduced_accuracy is None:
            return None
        return self.transduced_accuracy - self.zero_shot_accuracy
