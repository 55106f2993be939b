"""Regenerate the packaged fixture data under ``src/hive/data``.

Run from the repository root with ``python3 tools/build_fixtures.py``.

Writes:
  cards/*.md             model cards (front matter + markdown)
  pwc.jsonl              benchmark records aligned to the cards
  registry.json          stub backend per model
  provider/<sha>.txt     canned provider replies, keyed by prompt checksum
  ckg/muse.jsonl         capability graph ingested from the cards
  ckg/muse.specs.jsonl   execution specs for the graph
  bench/sample.jsonl     twelve runnable benchmark queries
  bench/muse100.jsonl    100-record benchmark with recorded outcomes
  bench/muse100.outcomes.jsonl
  taxonomy.json          three-level seed taxonomy (420 labels)

Canned replies are authored here and recorded by running the real pipeline
against an authoring provider; the script then re-runs every query from the
written files and checks the outputs.
"""

from __future__ import annotations

import json
import random
import shutil
import sys
from dataclasses import dataclass, field
from pathlib import Path

from hive import prompts
from hive.backends import BackendRegistry
from hive.ckg import dump_graph, load_graph_files
from hive.config import DATA_DIR, load_config
from hive.ingest import SPEC_RETRY_SUFFIX, Taxonomy, TaxonomyNode, build_graph, load_cards, load_pwc
from hive.pddl import load_domain_dir
from hive.pipeline import Engine
from hive.providers import FixtureProvider, ScriptedProvider, prompt_checksum
from hive.snippets import dump_specs

# --- model cards --------------------------------------------------------------------------


@dataclass
class Model:
    model_id: str
    tasks: list[str]
    license: str
    size_bytes: int
    stub: str
    summary: str
    usage: str | None  # code block shown under the usage heading
    function: str | None  # the usage-extraction reply
    arxiv: list[str] = field(default_factory=list)
    languages: list[str] = field(default_factory=list)
    citation: str | None = None
    malformed_first_reply: bool = False


def _pipeline_usage(task: str, model_id: str, call: str) -> str:
    return (
        "from transformers import pipeline\n\n"
        f'pipe = pipeline("{task}", model="{model_id}")\n'
        f"result = pipe({call})\n"
        "print(result)\n"
    )


def _pipeline_function(name: str, params: str, task: str, call: str) -> str:
    return (
        f"def {name}({params}):\n"
        "    from transformers import pipeline\n"
        f'    pipe = pipeline("{task}", model=model_path)\n'
        f"    return pipe({call})\n"
    )


MODELS = [
    Model(
        "openai/whisper-large-v2",
        ["automatic_speech_recognition"],
        "Apache-2.0",
        6_170_000_000,
        "asr_constitution",
        "Whisper is a pre-trained model for automatic speech recognition and speech translation.",
        (
            "from transformers import WhisperProcessor, WhisperForConditionalGeneration\n"
            "import librosa\n\n"
            'processor = WhisperProcessor.from_pretrained("openai/whisper-large-v2")\n'
            'model = WhisperForConditionalGeneration.from_pretrained("openai/whisper-large-v2")\n'
            'audio, rate = librosa.load("sample.flac", sr=16000)\n'
            'features = processor(audio, sampling_rate=rate, return_tensors="pt").input_features\n'
            "ids = model.generate(features)\n"
            "print(processor.batch_decode(ids, skip_special_tokens=True)[0])\n"
        ),
        (
            'def transcribe(audio_path="sample.flac", model_path="openai/whisper-large-v2"):\n'
            "    from transformers import WhisperProcessor, WhisperForConditionalGeneration\n"
            "    import librosa\n"
            "    processor = WhisperProcessor.from_pretrained(model_path)\n"
            "    model = WhisperForConditionalGeneration.from_pretrained(model_path)\n"
            "    audio, rate = librosa.load(audio_path, sr=16000)\n"
            '    features = processor(audio, sampling_rate=rate, return_tensors="pt").input_features\n'
            "    ids = model.generate(features)\n"
            "    return processor.batch_decode(ids, skip_special_tokens=True)[0]\n"
        ),
        arxiv=["2212.04356"],
        languages=["en", "fr", "de", "es", "it", "ja", "zh", "ar", "hi", "ru"],
    ),
    Model(
        "nvidia/parakeet-rnnt-1.1b",
        ["automatic_speech_recognition"],
        "CC-By-4.0",
        4_400_000_000,
        "asr_constitution",
        "A large RNN-T speech recognition model trained with the NeMo toolkit on English speech.",
        None,
        None,
        arxiv=["2305.05084"],
        languages=["en"],
        citation=(
            "@misc{rekesh2023fast,\n"
            "  title={Fast Conformer with Linearly Scalable Attention for Efficient Speech Recognition},\n"
            "  author={Rekesh, Dima and others},\n"
            "  year={2023}\n"
            "}\n"
        ),
    ),
    Model(
        "microsoft/speecht5_tts",
        ["text_to_speech"],
        "MIT",
        585_000_000,
        "text_to_speech_placeholder",
        "SpeechT5 fine-tuned for speech synthesis (text-to-speech).",
        _pipeline_usage("text-to-speech", "microsoft/speecht5_tts", '"Hello, my dog is cute"'),
        _pipeline_function(
            "synthesize_speech",
            'text="Hello, my dog is cute", model_path="microsoft/speecht5_tts"',
            "text-to-speech",
            "text",
        ),
        arxiv=["2110.07205"],
        languages=["en"],
    ),
    Model(
        "stabilityai/stable-diffusion-2-1",
        ["text_to_image"],
        "openrail++",
        5_210_000_000,
        "text_to_image_placeholder",
        "A latent diffusion model that generates images from text prompts.",
        (
            "from diffusers import StableDiffusionPipeline\n\n"
            'pipe = StableDiffusionPipeline.from_pretrained("stabilityai/stable-diffusion-2-1")\n'
            'image = pipe("a photo of an astronaut riding a horse on mars").images[0]\n'
            'image.save("astronaut.png")\n'
        ),
        (
            'def generate_image(prompt="a photo of an astronaut riding a horse on mars",'
            ' num_inference_steps=25, model_path="stabilityai/stable-diffusion-2-1"):\n'
            "    from diffusers import StableDiffusionPipeline\n"
            "    pipe = StableDiffusionPipeline.from_pretrained(model_path)\n"
            "    return pipe(prompt, num_inference_steps=num_inference_steps).images[0]\n"
        ),
        arxiv=["2112.10752"],
        malformed_first_reply=True,
    ),
    Model(
        "Salesforce/blip-image-captioning-base",
        ["image_captioning"],
        "BSD-3-Clause",
        990_000_000,
        "caption_filename",
        "BLIP model pre-trained for image captioning.",
        _pipeline_usage("image-to-text", "Salesforce/blip-image-captioning-base", '"demo.jpg"'),
        _pipeline_function(
            "caption_image",
            'image_path="demo.jpg", model_path="Salesforce/blip-image-captioning-base"',
            "image-to-text",
            "image_path",
        ),
        arxiv=["2201.12086"],
    ),
    Model(
        "facebook/detr-resnet-101",
        ["object_detection"],
        "Apache-2.0",
        243_000_000,
        "detect_placeholder",
        "DETR end-to-end object detection model with a ResNet-101 backbone.",
        _pipeline_usage("object-detection", "facebook/detr-resnet-101", '"cats.jpg"'),
        _pipeline_function(
            "detect_objects",
            'image_path="cats.jpg", threshold=0.9, model_path="facebook/detr-resnet-101"',
            "object-detection",
            "image_path, threshold=threshold",
        ),
        arxiv=["2005.12872"],
    ),
    Model(
        "Salesforce/blip-vqa-base",
        ["visual_question_answering"],
        "BSD-3-Clause",
        1_540_000_000,
        "vqa_count",
        "BLIP model trained on visual question answering.",
        _pipeline_usage(
            "visual-question-answering",
            "Salesforce/blip-vqa-base",
            'image="demo.jpg", question="how many dogs are in the picture?"',
        ),
        _pipeline_function(
            "answer_visual_question",
            'image_path="demo.jpg", question="how many dogs are in the picture?",'
            ' model_path="Salesforce/blip-vqa-base"',
            "visual-question-answering",
            "image=image_path, question=question",
        ),
        arxiv=["2201.12086"],
    ),
    Model(
        "Intel/dpt-hybrid-midas",
        ["depth_estimation"],
        "Apache-2.0",
        490_000_000,
        "depth_placeholder",
        "Dense Prediction Transformer for monocular depth estimation.",
        _pipeline_usage("depth-estimation", "Intel/dpt-hybrid-midas", '"cats.jpg"'),
        _pipeline_function(
            "estimate_depth",
            'image_path="cats.jpg", model_path="Intel/dpt-hybrid-midas"',
            "depth-estimation",
            "image_path",
        ),
        arxiv=["2103.13413"],
    ),
    Model(
        "Helsinki-NLP/opus-mt-en-fr",
        ["machine_translation"],
        "Apache-2.0",
        301_000_000,
        "translate_tag",
        "MarianMT model translating English to French.",
        _pipeline_usage("translation_en_to_fr", "Helsinki-NLP/opus-mt-en-fr", '"How old are you?"'),
        _pipeline_function(
            "translate",
            'text="How old are you?", target_lang="fr", model_path="Helsinki-NLP/opus-mt-en-fr"',
            "translation_en_to_fr",
            "text",
        ),
        languages=["en", "fr"],
    ),
    Model(
        "mistralai/Mistral-7B-Instruct-v0.1",
        ["open_question_answering", "text_generation"],
        "Apache-2.0",
        14_480_000_000,
        "textgen_continue",
        "An instruction fine-tuned 7B language model.",
        _pipeline_usage(
            "text-generation", "mistralai/Mistral-7B-Instruct-v0.1", '"Tell me a story", max_new_tokens=256'
        ),
        _pipeline_function(
            "generate_text",
            'prompt="Tell me a story", max_new_tokens=256, model_path="mistralai/Mistral-7B-Instruct-v0.1"',
            "text-generation",
            "prompt, max_new_tokens=max_new_tokens",
        ),
        arxiv=["2310.06825"],
    ),
    Model(
        "distilbert/distilbert-base-uncased-distilled-squad",
        ["context_question_answering"],
        "Apache-2.0",
        265_000_000,
        "qa_overlap",
        "DistilBERT fine-tuned on SQuAD for extractive question answering.",
        _pipeline_usage(
            "question-answering",
            "distilbert/distilbert-base-uncased-distilled-squad",
            'question="Who was Jim Henson?", context="Jim Henson was a nice puppet"',
        ),
        _pipeline_function(
            "answer_question",
            'question="Who was Jim Henson?", context="Jim Henson was a nice puppet",'
            ' model_path="distilbert/distilbert-base-uncased-distilled-squad"',
            "question-answering",
            "question=question, context=context",
        ),
        arxiv=["1910.01108"],
    ),
    Model(
        "Yale-LILY/reastap-large",
        ["table_question_answering"],
        "AFL-3.0",
        1_630_000_000,
        "table_qa_lookup",
        "ReasTAP: a table reasoning model for table question answering.",
        _pipeline_usage(
            "table-question-answering",
            "Yale-LILY/reastap-large",
            'table={"year": ["1896", "2008"], "city": ["athens", "beijing"]},'
            ' query="In which year did beijing host the Olympic Games?"',
        ),
        _pipeline_function(
            "answer_table_question",
            'table="{}", query="In which year did beijing host the Olympic Games?",'
            ' model_path="Yale-LILY/reastap-large"',
            "table-question-answering",
            "table=table, query=query",
        ),
    ),
    Model(
        "facebook/bart-large-cnn",
        ["abstractive_summarisation"],
        "MIT",
        1_630_000_000,
        "summarise_lead",
        "BART fine-tuned on CNN Daily Mail for news summarisation.",
        _pipeline_usage("summarization", "facebook/bart-large-cnn", "ARTICLE, max_length=130"),
        _pipeline_function(
            "summarise",
            'text="The tower is 324 metres tall.", max_length=130, model_path="facebook/bart-large-cnn"',
            "summarization",
            "text, max_length=max_length",
        ),
        arxiv=["1910.13461"],
        languages=["en"],
    ),
    Model(
        "facebook/bart-large-mnli",
        ["text_classification"],
        "MIT",
        1_630_000_000,
        "classify_overlap",
        "BART trained on MultiNLI, usable for zero-shot text classification.",
        _pipeline_usage(
            "zero-shot-classification",
            "facebook/bart-large-mnli",
            '"one day I will see the world", candidate_labels=["travel", "cooking", "dancing"]',
        ),
        _pipeline_function(
            "classify_text",
            'text="one day I will see the world", candidate_labels=\'["travel", "cooking", "dancing"]\','
            ' model_path="facebook/bart-large-mnli"',
            "zero-shot-classification",
            "text, candidate_labels=candidate_labels",
        ),
        arxiv=["1910.13461"],
    ),
    Model(
        "dslim/bert-base-NER",
        ["named_entity_recognition"],
        "MIT",
        433_000_000,
        "ner_capitalized",
        "BERT fine-tuned for named entity recognition (LOC, ORG, PER, MISC).",
        _pipeline_usage("ner", "dslim/bert-base-NER", '"My name is Wolfgang and I live in Berlin"'),
        _pipeline_function(
            "extract_entities",
            'text="My name is Wolfgang and I live in Berlin", model_path="dslim/bert-base-NER"',
            "ner",
            "text",
        ),
        arxiv=["1810.04805"],
        languages=["en"],
    ),
]

PWC_RECORDS = [
    ("2212.04356", "whisper-large-v2", "Speech Recognition on Common Voice English", "WER", 9.0),
    ("2212.04356", "whisper-large-v2", "Speech Recognition on LibriSpeech test-clean", "WER", 2.7),
    ("2212.04356", "whisper-tiny", "Speech Recognition on Common Voice English", "WER", 28.8),
    ("2305.05084", "parakeet-rnnt-1.1b", "Speech Recognition on Common Voice English", "WER", 6.0),
    ("2005.12872", "detr-resnet-101", "Object Detection on COCO minival", "box AP", 43.5),
    ("2005.12872", "detr-resnet-50", "Object Detection on COCO minival", "box AP", 42.0),
    ("1910.13461", "bart-large-cnn", "Abstractive Text Summarization on CNN / Daily Mail", "ROUGE-1", 44.16),
    ("1910.01108", "distilbert-base-uncased-distilled-squad", "Question Answering on SQuAD1.1", "F1", 86.9),
    ("2103.13413", "dpt-hybrid-midas", "Monocular Depth Estimation on NYU-Depth V2", "RMSE", 0.357),
    ("2310.06825", "Mistral-7B-Instruct-v0.1", "Multi-task Language Understanding on MMLU", "Accuracy", 60.1),
]


def card_text(m: Model) -> str:
    def yaml_list(xs):
        return "[" + ", ".join(xs) + "]"

    head = [
        "---",
        f"model_id: {m.model_id}",
        f"tasks: {yaml_list(m.tasks)}",
        f"license: {m.license}",
        f"size_bytes: {m.size_bytes}",
    ]
    if m.arxiv:
        head.append(f'arxiv_ids: [{", ".join(json.dumps(a) for a in m.arxiv)}]')
    if m.languages:
        head.append(f"languages: {yaml_list(m.languages)}")
    head.append("---")
    body = [f"# {m.model_id}", "", m.summary, ""]
    if m.usage:
        body += ["## Usage", "", "```python", m.usage.rstrip("\n"), "```", ""]
    if m.citation:
        body += ["## Citation", "", "```bibtex", m.citation.rstrip("\n"), "```", ""]
    return "\n".join(head + body)


# --- queries ---------------------------------------------------------------------------------


@dataclass
class Query:
    id: str
    text: str
    parse: dict
    domains: list[str]
    actions: list[str]
    expected: list[str] | None = None  # benchmark record when set
    modality_in: list[str] = field(default_factory=list)
    modality_out: list[str] = field(default_factory=list)
    contains: str | None = None


ASR = "automatic_speech_recognition"
NER = "named_entity_recognition"
SUMM = "abstractive_summarisation"
T2I = "text_to_image"
TTS = "text_to_speech"

QUERIES = [
    Query(
        "q01",
        "Transcribe the audio from ./audio_1.wav and find entity tokens",
        {"instruction": "Transcribe the audio and find the named entities in the transcript",
         "url": "./audio_1.wav"},
        ["audio", "token_classification"],
        [ASR, NER],
        [ASR, NER], ["audio"], ["text"], "United States of America",
    ),
    Query(
        "q02",
        "How many people is in the image? ./data/images/image_6.jpg",
        {"instruction": "Answer the question about the image",
         "question": "How many people is in the image?", "url": "./data/images/image_6.jpg"},
        ["image_to_text"],
        ["visual_question_answering"],
        ["visual_question_answering"], ["image"], ["text"], "2",
    ),
    Query(
        "q03",
        "Write me a sonnet about this image ./data/images/image_11.jpg",
        {"instruction": "Describe the image, then write a sonnet about the description",
         "url": "./data/images/image_11.jpg"},
        ["image_to_text", "text_generation"],
        ["image_captioning", "text_generation"],
        ["image_captioning", "text_generation"], ["image"], ["text"], "a picture of image 11",
    ),
    Query(
        "q04",
        "Build a pictorial presentation of the flower after deciphering the audio ./data/audios/audio_4.wav",
        {"instruction": "Transcribe the audio, then generate an image from the transcript",
         "url": "./data/audios/audio_4.wav"},
        ["audio", "image_generation"],
        [ASR, T2I],
        [ASR, T2I], ["audio"], ["image"], "generated/image_",
    ),
    Query(
        "q05",
        "Use audio transcription as context and answer 'what is the country starting the war whom the "
        "associated speech is about?' from ./data/audios/audio_6.wav",
        {"instruction": "Transcribe the audio and answer the question using the transcript as context",
         "question": "what is the country starting the war whom the associated speech is about?",
         "url": "./data/audios/audio_6.wav"},
        ["audio", "question_answering"],
        [ASR, "context_question_answering"],
        [ASR, "context_question_answering"], ["audio"], ["text"], "United States",
    ),
    Query(
        "q06",
        "Extract a summary from the audio transcript ./data/audios/audio_8.wav, and generate an image "
        "based on the summary",
        {"instruction": "Transcribe the audio, summarise the transcript, then generate an image from the summary",
         "url": "./data/audios/audio_8.wav"},
        ["audio", "summarisation", "image_generation"],
        [ASR, SUMM, T2I],
        [ASR, SUMM, T2I], ["audio"], ["image"], "generated/image_",
    ),
    Query(
        "q07",
        "Translate 'The weather is lovely today' into French",
        {"instruction": "Translate the text into French", "input_text": "The weather is lovely today"},
        ["machine_translation"],
        ["machine_translation"],
        ["machine_translation"], ["text"], ["text"], "[fr] The weather is lovely today",
    ),
    Query(
        "q08",
        "Summarise this text: The committee met on Monday. It approved the new budget. Members then adjourned.",
        {"instruction": "Summarise the text",
         "input_text": "The committee met on Monday. It approved the new budget. Members then adjourned."},
        ["summarisation"],
        [SUMM],
        [SUMM], ["text"], ["text"], "committee met on Monday",
    ),
    Query(
        "q09",
        "Classify the review 'a great movie with a great cast' into categories such as 'great', 'poor' or 'average'",
        {"instruction": "Classify the text into the given categories",
         "input_text": "a great movie with a great cast", "categories": ["great", "poor", "average"]},
        ["text_classification"],
        ["text_classification"],
        ["text_classification"], ["text"], ["text"], "great",
    ),
    Query(
        "q10",
        "Estimate the depth of ./data/images/image_2.png",
        {"instruction": "Estimate the depth map of the image", "url": "./data/images/image_2.png"},
        ["image_to_image"],
        ["depth_estimation"],
        ["depth_estimation"], ["image"], ["image"], "generated/depth_",
    ),
    Query(
        "q11",
        "Using the table {'city': 'Paris', 'population': '2.1 million'} answer: what is the population of Paris?",
        {"instruction": "Answer the question from the table",
         "question": "what is the population of Paris?",
         "data_dict": {"city": "Paris", "population": "2.1 million"}},
        ["question_answering"],
        ["table_question_answering"],
        ["table_question_answering"], ["text"], ["text"], "2.1 million",
    ),
    Query(
        "q12",
        "Transcribe ./data/audios/audio_2.wav, summarise it and read the summary aloud",
        {"instruction": "Transcribe the audio, summarise the transcript, then read the summary aloud",
         "url": "./data/audios/audio_2.wav"},
        ["audio", "summarisation"],
        [ASR, SUMM, TTS],
        [ASR, SUMM, TTS], ["audio"], ["audio"], "generated/speech_",
    ),
    # not benchmark records: documentation and test scenarios
    Query(
        "x01",
        "Write a short poem about the sea",
        {"instruction": "Write a short poem about the sea"},
        ["text_generation"],
        ["text_generation"],
    ),
    Query(
        "x02",
        "Who wrote the novel Dracula?",
        {"instruction": "Answer the question", "question": "Who wrote the novel Dracula?"},
        ["question_answering"],
        ["open_question_answering"],
    ),
    Query(
        "x03",
        "Translate 'good morning' to French and read it aloud",
        {"instruction": "Translate the text into French, then read the translation aloud",
         "input_text": "good morning"},
        ["machine_translation", "audio"],
        ["machine_translation", TTS],
    ),
]

SPLIT_NAMES = {1: "Single", 2: "Two", 3: "Three"}


# --- authoring provider -------------------------------------------------------------------------


def _prefix(name: str) -> str:
    return prompts.template_text(name)[:60]


class Author:
    """Provider that answers prompts from the tables above and records every reply."""

    def __init__(self):
        self.replies: dict[str, str] = {}
        self.current: Query | None = None
        self.prefixes = {name: _prefix(name) for name in prompts.PLACEHOLDERS}

    def kind(self, prompt: str) -> str:
        for name, prefix in self.prefixes.items():
            if prompt.startswith(prefix):
                return name
        raise AssertionError(f"unrecognised prompt: {prompt[:80]!r}")

    def __call__(self, prompt: str) -> str:
        kind = self.kind(prompt)
        if kind == prompts.USAGE_EXTRACTION:
            reply = self._usage(prompt)
        else:
            q = self.current
            assert q is not None, "query prompt outside a query"
            if kind == prompts.PARSING:
                reply = json.dumps(q.parse)
            elif kind == prompts.DOMAIN_CLASSIFICATION:
                reply = "Domains: " + "; ".join(q.domains)
            else:
                reply = json.dumps(q.actions)
        self.replies[prompt_checksum(prompt)] = reply
        return reply

    @staticmethod
    def _usage(prompt: str) -> str:
        retry = prompt.endswith(SPEC_RETRY_SUFFIX)
        for m in MODELS:
            if m.usage and m.usage.rstrip("\n") in prompt:
                if m.malformed_first_reply and not retry:
                    # prose without a code fence: exercises the repair retry
                    return f"Call generate_image with a prompt to run {m.model_id}."
                return f"```python\n{m.function}```"
        raise AssertionError("usage prompt matches no card")


# --- benchmark fixtures ----------------------------------------------------------------------------

# Row types: (TS, FoT, O) as produced by the recorded outcome.
#   a (1,1,1)  b (1,1,0)  c (1,0,0)  d (0,0,0)  e (1,1,Err)  f (Err,Err,Err)
ROW_MIX = {
    "Single": {"a": 19, "b": 2, "c": 0, "d": 3, "e": 0, "f": 1},
    "Two": {"a": 33, "b": 6, "c": 1, "d": 17, "e": 1, "f": 1},
    "Three": {"a": 6, "b": 2, "c": 0, "d": 5, "e": 2, "f": 1},
}
# mean latency per split over timed rows (ms); failed rows are untimed
SPLIT_LATENCY_MS = {"Single": 4280, "Two": 5020, "Three": 6400}

TASK_IO = {
    ASR: ("audio", "text"),
    TTS: ("text", "audio"),
    T2I: ("text", "image"),
    "depth_estimation": ("image", "image"),
    "image_captioning": ("image", "text"),
    "object_detection": ("image", "text"),
    "visual_question_answering": ("image", "text"),
    "machine_translation": ("text", "text"),
    "context_question_answering": ("text", "text"),
    "open_question_answering": ("text", "text"),
    "table_question_answering": ("text", "text"),
    SUMM: ("text", "text"),
    "text_classification": ("text", "text"),
    "text_generation": ("text", "text"),
    NER: ("text", "text"),
}

CHAINS = {
    "Single": [[t] for t in TASK_IO],
    "Two": [
        [ASR, NER], [ASR, SUMM], [ASR, "context_question_answering"], ["image_captioning", "text_generation"],
        [ASR, T2I], ["machine_translation", TTS], [SUMM, TTS], ["image_captioning", "machine_translation"],
        [ASR, "text_classification"], ["object_detection", "text_generation"], [SUMM, T2I],
    ],
    "Three": [
        [ASR, SUMM, T2I], [ASR, SUMM, TTS], ["image_captioning", "machine_translation", TTS],
        [ASR, "machine_translation", TTS], ["image_captioning", "text_generation", T2I],
    ],
}

CHAIN_PHRASES = {
    ASR: "transcribe the recording",
    TTS: "read the result aloud",
    T2I: "draw a picture of it",
    "depth_estimation": "estimate the depth of the photo",
    "image_captioning": "describe the photo",
    "object_detection": "detect the objects in the photo",
    "visual_question_answering": "answer a question about the photo",
    "machine_translation": "translate it into French",
    "context_question_answering": "answer a question from it",
    "open_question_answering": "answer a general knowledge question",
    "table_question_answering": "answer a question about the table",
    SUMM: "summarise it",
    "text_classification": "classify it by topic",
    "text_generation": "write a short story from it",
    NER: "list the named entities",
}


def _wrong_selection(expected: list[str]) -> list[str]:
    if len(expected) > 1:
        return expected[:-1]
    return ["text_generation"] if expected[0] != "text_generation" else ["open_question_answering"]


def muse100() -> tuple[list[dict], list[dict]]:
    rng = random.Random(20250101)
    records, outcomes = [], []
    n = 0
    for split, mix in ROW_MIX.items():
        kinds = [k for k, c in mix.items() for _ in range(c)]
        rng.shuffle(kinds)
        timed = sum(1 for k in kinds if k != "f")
        # latencies spread symmetrically around the split mean, so the mean is exact
        deltas = []
        for i in range(timed // 2):
            d = 150 * (1 + i % 7)
            deltas += [d, -d]
        deltas += [0] * (timed - len(deltas))
        rng.shuffle(deltas)
        chains = CHAINS[split]
        for i, kind in enumerate(kinds):
            n += 1
            rid = f"m{n:03d}"
            expected = chains[i % len(chains)]
            text = "Please " + ", then ".join(CHAIN_PHRASES[t] for t in expected) + f" (item {n})"
            records.append({
                "id": rid,
                "query": text,
                "expected_tasks": expected,
                "split": split,
                "modality_in": [TASK_IO[expected[0]][0]],
                "modality_out": [TASK_IO[expected[-1]][1]],
            })
            if kind == "f":
                outcomes.append({"record_id": rid, "selected_tasks": "Err", "plan_order": "Err",
                                 "output_ok": "Err", "t_select_ms": None})
                continue
            t = SPLIT_LATENCY_MS[split] + deltas.pop()
            selected, order, ok = list(expected), list(expected), None
            if kind == "a":
                ok = 1
            elif kind == "b":
                ok = 0
            elif kind == "c":
                order = list(reversed(expected))
                ok = 0
            elif kind == "d":
                selected = _wrong_selection(expected)
                order = list(selected)
                ok = 0
            elif kind == "e":
                ok = "Err"
            outcomes.append({"record_id": rid, "selected_tasks": selected, "plan_order": order,
                             "output_ok": ok, "t_select_ms": t})
    return records, outcomes


def sample_records() -> list[dict]:
    out = []
    for q in QUERIES:
        if q.expected is None:
            continue
        out.append({
            "id": q.id,
            "query": q.text,
            "expected_tasks": q.expected,
            "split": SPLIT_NAMES[len(q.expected)],
            "modality_in": q.modality_in,
            "modality_out": q.modality_out,
            "output_contains": q.contains,
        })
    return out


# --- taxonomy seed -------------------------------------------------------------------------------------

TAXONOMY_TOP = {
    "audio processing": [
        "speech recognition", "speech synthesis", "speaker identification", "audio classification",
        "voice conversion", "audio enhancement", "music generation", "sound event detection",
    ],
    "computer vision": [
        "image classification", "object detection", "image segmentation", "depth estimation",
        "image generation", "image captioning", "pose estimation", "optical character recognition",
    ],
    "natural language processing": [
        "machine translation", "text summarisation", "question answering", "text classification",
        "named entity recognition", "text generation", "sentiment analysis", "semantic parsing",
    ],
    "multimodal learning": [
        "visual question answering", "text to video", "document understanding", "image retrieval",
        "video captioning", "audio visual speech", "table question answering", "chart understanding",
    ],
}
TAXONOMY_QUALIFIERS = [
    "for english", "for low-resource languages", "on mobile devices", "in real time", "for long inputs",
    "with few examples", "without supervision", "for medical data", "for legal data", "for noisy inputs",
    "at scale", "with explanations",
]


def taxonomy_seed() -> Taxonomy:
    roots = []
    for top, mids in TAXONOMY_TOP.items():
        children = [
            TaxonomyNode(mid, [TaxonomyNode(f"{mid} {q}") for q in TAXONOMY_QUALIFIERS]) for mid in mids
        ]
        roots.append(TaxonomyNode(top, children))
    return Taxonomy(roots)


# --- driver ------------------------------------------------------------------------------------------


def write_jsonl(path: Path, rows: list[dict]) -> None:
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")


def main() -> int:
    data = DATA_DIR
    cards_dir = data / "cards"
    provider_dir = data / "provider"
    for d in (cards_dir, provider_dir):
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
    for d in (data / "ckg", data / "bench"):
        d.mkdir(parents=True, exist_ok=True)

    for m in MODELS:
        name = m.model_id.replace("/", "__") + ".md"
        (cards_dir / name).write_text(card_text(m), encoding="utf-8")
    write_jsonl(data / "pwc.jsonl", [
        {"arxiv_id": a, "model_variant": v, "benchmark": b, "metric": mt, "value": val}
        for a, v, b, mt, val in PWC_RECORDS
    ])
    (data / "registry.json").write_text(
        json.dumps({m.model_id: {"backend": "stub", "stub": m.stub} for m in MODELS}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )

    author = Author()
    scripted = ScriptedProvider(author)
    cards = load_cards(cards_dir)
    with open(data / "pwc.jsonl", encoding="utf-8") as f:
        records = load_pwc(f)
    report = build_graph(cards, records, scripted)
    for w in report.warnings:
        print("ingest warning:", w)
    (data / "ckg" / "muse.jsonl").write_text(dump_graph(report.graph), encoding="utf-8")
    (data / "ckg" / "muse.specs.jsonl").write_text(dump_specs(report.graph.specs), encoding="utf-8")

    cfg = load_config(env={}, flags={})
    graph = load_graph_files(cfg.path("ckg.path"))
    domains = load_domain_dir(cfg.path("domains.path"))
    registry = BackendRegistry.load(data / "registry.json")
    engine = Engine(cfg, scripted, graph, domains, registry)
    for q in QUERIES:
        author.current = q
        engine.run(q.text)
    author.current = None

    for sha, reply in sorted(author.replies.items()):
        (provider_dir / f"{sha}.txt").write_text(reply, encoding="utf-8")

    write_jsonl(data / "bench" / "sample.jsonl", sample_records())
    recs, outs = muse100()
    write_jsonl(data / "bench" / "muse100.jsonl", recs)
    write_jsonl(data / "bench" / "muse100.outcomes.jsonl", outs)
    (data / "taxonomy.json").write_text(json.dumps(taxonomy_seed().to_record(), indent=1) + "\n", encoding="utf-8")

    # replay from the written files and report
    replay = Engine(cfg, FixtureProvider(provider_dir), graph, domains, registry)
    failures = 0
    for q in QUERIES:
        out = replay.run(q.text)
        tr = out.trace
        order = [s.action for s in tr.steps]
        ok = tr.final_status == "Ok" and not tr.parsed.degraded
        if q.expected is not None:
            ok = ok and order == q.expected and q.contains.lower() in (tr.final_output or "").lower()
        failures += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {q.id} plan={order} status={tr.final_status} "
              f"output={(tr.final_output or '')[:70]!r}")
    print(f"{len(author.replies)} canned replies, {len(report.graph)} triples, {len(report.graph.specs)} specs")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
