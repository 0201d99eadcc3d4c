from topic_experts.management.stage import StageCommand
from topic_experts.synth import SynthConfig, generate, write_dataset


class Command(StageCommand):
    help = "Generates a synthetic dataset with a planted expertise model."
    stage = "synth"

    def run(self, **options):
        config = SynthConfig.from_json(options["config"]) if options["config"] else SynthConfig()
        seed = options["seed"] or 0
        summary = write_dataset(generate(config, seed), self.out_dir)
        self.stdout.write(
            f"Wrote {summary['events']} events and {summary['evaluations']} evaluations to {self.out_dir}"
        )
        return summary
