# runs/admin.py

from django.contrib import admin

from .models import TransductionRun


# ------------------------------
# TransductionRun Admin
# ------------------------------
@admin.register(TransductionRun)
class TransductionRunAdmin(admin.ModelAdmin):
    list_display = (
        'created_at',
        'command',
        'query_path',
        'n_query',
        'n_classes',
        'lambda_weight',
        'gamma',
        'zero_shot_accuracy',
        'transduced_accuracy',
        'gain_display',
        'descent_violations',
    )
    list_filter = ('command', 'created_at', 'k_nn')
    search_fields = ('query_path', 'text_path', 'support_path')

    fieldsets = (
        ('Inputs', {
            'fields': ('command', 'query_path', 'text_path', 'support_path', 'n_query', 'n_support', 'n_classes', 'dim')
        }),
        ('Hyper-parameters', {
            'fields': ('tau', 'lambda_weight', 'gamma', 'outer_iters', 'inner_z_iters', 'k_nn', 'top_m_init')
        }),
        ('Results', {
            'fields': ('zero_shot_accuracy', 'transduced_accuracy', 'final_objective', 'descent_violations', 'gamma_scores')
        }),
        ('Objective Trace', {
            'fields': ('objective_trace',),
            'classes': ('collapse',)
        }),
    )
    readonly_fields = [field.name for field in TransductionRun._meta.fields]

    @admin.display(description='Gain')
    def gain_display(self, obj):
        gain = obj.accuracy_gain
        return '-' if gain is None else f"{gain:+.4f}"

    def has_add_permission(self, request):
        # Runs are only created by the commands.
        return False
