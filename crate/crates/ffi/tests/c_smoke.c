#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "patchblur.h"

/* usage: c_smoke MODEL IMAGE */
int main(int argc, char **argv) {
    if (argc != 3) return 64;
    PbModel *model = NULL;
    PbImage *img = NULL;
    if (pb_model_load(argv[1], &model) != PB_STATUS_OK) {
        fprintf(stderr, "model: %s\n", pb_last_error_message());
        return 1;
    }
    if (pb_image_load(argv[2], &img) != PB_STATUS_OK) {
        fprintf(stderr, "image: %s\n", pb_last_error_message());
        return 1;
    }
    size_t n = pb_model_n_features(model);
    double *buf = malloc(n * sizeof(double));
    size_t written = 0;
    if (pb_extract_features(model, img, buf, 0, &written) != PB_STATUS_BUFFER_TOO_SMALL || written != n) return 2;
    if (pb_extract_features(model, img, buf, n, &written) != PB_STATUS_OK) return 3;
    double p1 = 0, p2 = 0;
    uint8_t label = 7;
    if (pb_predict_proba(model, buf, n, &p1) != PB_STATUS_OK) return 4;
    if (pb_classify_image(model, img, 0.5, &p2, &label) != PB_STATUS_OK) return 5;
    if (p1 != p2 || label != (p2 > 0.5)) return 6;
    if (pb_model_load("/nonexistent/model.json", &model) == PB_STATUS_OK) return 7;
    if (strlen(pb_last_error_message()) == 0) return 8;
    printf("%s %s %zu %.17g %u\n", pb_version(), pb_model_config_id(model), n, p2, label);
    free(buf);
    pb_image_free(img);
    pb_model_free(model);
    return 0;
}
