// optional runtime dependency: pretrained encoders load it dynamically and
// fail with an install hint when it is absent
declare module '@huggingface/transformers';
