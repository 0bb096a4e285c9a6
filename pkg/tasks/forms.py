from django import forms

from .types import (
    DEFAULT_INNER_Z_ITERS, DEFAULT_K_NN, DEFAULT_OUTER_ITERS, DEFAULT_TOP_M_INIT,
    FEW_SHOT_LAMBDA, ZERO_SHOT_LAMBDA, Hyperparams,
)


class HyperparamsForm(forms.Form):
    """
    Validates solver settings coming from command flags and config files.

    Every field is optional; an empty field falls back to the built-in default of
    the setting (zero-shot or few-shot) chosen with ``few_shot``.
    """
    lambda_weight = forms.FloatField(required=False, min_value=0.0)
    gamma = forms.FloatField(required=False, min_value=0.0)
    outer_iters = forms.IntegerField(required=False, min_value=0)
    inner_z_iters = forms.IntegerField(required=False, min_value=1)
    k_nn = forms.IntegerField(required=False, min_value=0)
    top_m_init = forms.IntegerField(required=False, min_value=1)
    tau = forms.FloatField(required=False)
    symmetrize_graph = forms.BooleanField(required=False)
    freeze_mu = forms.BooleanField(required=False)
    freeze_sigma = forms.BooleanField(required=False)
    isotropic_sigma = forms.BooleanField(required=False)

    def __init__(self, *args, few_shot=False, **kwargs):
        super().__init__(*args, **kwargs)
        self.few_shot = few_shot

    def clean_tau(self):
        tau = self.cleaned_data.get('tau')
        if tau is not None and not tau > 0:
            raise forms.ValidationError("Temperature must be positive.", code='tau_not_positive')
        return tau

    def clean(self):
        cleaned_data = super().clean()
        if not self.few_shot and cleaned_data.get('gamma'):
            raise forms.ValidationError(
                "γ weights the support shots and only applies to few-shot runs.",
                code='gamma_without_support',
            )
        return cleaned_data

    def _value(self, name, default):
        value = self.cleaned_data.get(name)
        return default if value is None else value

    def to_hyperparams(self):
        """Build Hyperparams from a valid form."""
        return Hyperparams(
            lambda_weight=self._value('lambda_weight', FEW_SHOT_LAMBDA if self.few_shot else ZERO_SHOT_LAMBDA),
            gamma=self._value('gamma', 0.0),
            outer_iters=self._value('outer_iters', DEFAULT_OUTER_ITERS),
            inner_z_iters=self._value('inner_z_iters', DEFAULT_INNER_Z_ITERS),
            k_nn=self._value('k_nn', DEFAULT_K_NN),
            top_m_init=self._value('top_m_init', DEFAULT_TOP_M_INIT),
            symmetrize_graph=bool(self.cleaned_data.get('symmetrize_graph')),
            update_mu=not self.cleaned_data.get('freeze_mu'),
            update_sigma=not self.cleaned_data.get('freeze_sigma'),
            isotropic_sigma=bool(self.cleaned_data.get('isotropic_sigma')),
        )
