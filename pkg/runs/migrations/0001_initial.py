# Generated by Django 5.2.1

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='TransductionRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('run_zs', 'Zero-shot transduction'), ('run_fs', 'Few-shot transduction')], max_length=10)),
                ('query_path', models.CharField(max_length=500)),
                ('text_path', models.CharField(max_length=500)),
                ('support_path', models.CharField(blank=True, default='', max_length=500)),
                ('n_query', models.PositiveIntegerField()),
                ('n_support', models.PositiveIntegerField(default=0)),
                ('n_classes', models.PositiveIntegerField()),
                ('dim', models.PositiveIntegerField()),
                ('tau', models.FloatField()),
                ('lambda_weight', models.FloatField()),
                ('gamma', models.FloatField(default=0.0)),
                ('outer_iters', models.PositiveIntegerField()),
                ('inner_z_iters', models.PositiveIntegerField()),
                ('k_nn', models.PositiveIntegerField()),
                ('top_m_init', models.PositiveIntegerField()),
                ('zero_shot_accuracy', models.FloatField(blank=True, help_text='Top-1 accuracy of the text prior alone, when truth labels were given.', null=True)),
                ('transduced_accuracy', models.FloatField(blank=True, help_text='Top-1 accuracy after transduction, when truth labels were given.', null=True)),
                ('final_objective', models.FloatField(blank=True, null=True)),
                ('objective_trace', models.JSONField(blank=True, default=list, help_text='[iteration, block, paper_literal, update_consistent] rows.')),
                ('gamma_scores', models.JSONField(blank=True, default=list, help_text='[gamma, validation_accuracy] rows of the few-shot search.')),
                ('descent_violations', models.PositiveIntegerField(default=0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name': 'Transduction Run',
                'verbose_name_plural': 'Transduction Runs',
                'ordering': ['-created_at'],
            },
        ),
    ]
