#!/usr/bin/env python3

logo = '                                 __\n' \
       '  ________  ____  _________  ___/ /___\n' \
       ' / ___/ _ \\/ __ \\/ ___/ __ \\/ __  / __ \\\n' \
       '/ /  /  __/ /_/ / /  / /_/ / /_/ / /_/ /\n' \
       '/_/   \\___/ .___/_/   \\____/\\__,_/ .___/\n' \
       '---------/_/--------------------/_/----\n' \
       '[SAME SEEDS, FRESH DRAWS]'
