from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='FineReference',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('problem_key', models.CharField(max_length=64)),
                ('benchmark', models.CharField(max_length=100)),
                ('wavenumber', models.FloatField()),
                ('length', models.FloatField()),
                ('n_ref', models.PositiveIntegerField()),
                ('scheme', models.CharField(choices=[('bpf', 'BPF'), ('fd', 'Classical FD'), ('fd-dc', 'Dispersion-corrected FD')], max_length=8)),
                ('values', models.BinaryField()),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
        ),
        migrations.AddConstraint(
            model_name='finereference',
            constraint=models.UniqueConstraint(fields=('problem_key', 'n_ref', 'scheme'), name='unique_fine_reference'),
        ),
    ]
